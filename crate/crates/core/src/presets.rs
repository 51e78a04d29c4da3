//! Per-dataset reservoir settings and dataset sizes of the seven benchmark
//! datasets.

use crate::reservoir::ReservoirConfig;

/// Layer count used by the multi-layer variants.
pub const ML_LAYERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    /// Lookup key: lowercase, no separators.
    pub key: &'static str,
    /// File stem used by the UCR archive (`<name>_TRAIN.tsv`).
    pub name: &'static str,
    pub n_hidden: usize,
    pub connectivity: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub length: usize,
    pub n_classes: usize,
}

impl Preset {
    /// Reservoir settings for patterns of length `input_dim` with `n_layers`
    /// reservoirs; everything not fixed by the preset keeps its default.
    pub fn reservoir_config(&self, input_dim: usize, n_layers: usize) -> ReservoirConfig {
        ReservoirConfig::new(self.n_hidden, self.connectivity, input_dim).with_layers(n_layers)
    }
}

pub const PRESETS: [Preset; 7] = [
    Preset {
        key: "ecg200",
        name: "ECG200",
        n_hidden: 150,
        connectivity: 0.1,
        train_size: 100,
        test_size: 100,
        length: 96,
        n_classes: 2,
    },
    Preset {
        key: "breastcancer",
        name: "BreastCancer",
        n_hidden: 50,
        connectivity: 0.05,
        train_size: 500,
        test_size: 199,
        length: 9,
        n_classes: 2,
    },
    Preset {
        key: "coffee",
        name: "Coffee",
        n_hidden: 100,
        connectivity: 0.1,
        train_size: 28,
        test_size: 28,
        length: 286,
        n_classes: 2,
    },
    Preset {
        key: "oliveoil",
        name: "OliveOil",
        n_hidden: 300,
        connectivity: 0.001,
        train_size: 30,
        test_size: 30,
        length: 570,
        n_classes: 4,
    },
    Preset {
        key: "earthquakes",
        name: "Earthquakes",
        n_hidden: 600,
        connectivity: 0.002,
        train_size: 139,
        test_size: 322,
        length: 512,
        n_classes: 2,
    },
    Preset {
        key: "meat",
        name: "Meat",
        n_hidden: 250,
        connectivity: 0.01,
        train_size: 60,
        test_size: 60,
        length: 448,
        n_classes: 3,
    },
    Preset {
        key: "ecgfivedays",
        name: "ECGFiveDays",
        n_hidden: 100,
        connectivity: 0.04,
        train_size: 23,
        test_size: 861,
        length: 136,
        n_classes: 2,
    },
];

/// Case-insensitive lookup ignoring `-`, `_` and spaces, so `ECG200`,
/// `olive-oil` and `Olive Oil` all resolve.
pub fn lookup(name: &str) -> Option<&'static Preset> {
    let key: String = name.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).flat_map(char::to_lowercase).collect();
    PRESETS.iter().find(|p| p.key == key)
}
