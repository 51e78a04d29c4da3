use esnrae::dataio::{inject_noise, measured_snr, normalize, parse_ucr_str, to_ucr_string, Dataset, NoiseSpec, Split};
use esnrae::numerics::{dense_random_matrix, Matrix, SeededRng};
use proptest::prelude::*;

fn random_dataset(p: usize, k: usize, seed: u64) -> Dataset {
    let m = dense_random_matrix(p, k, -3.0, 5.0, &SeededRng::new(seed, "data")).unwrap();
    let raw: Vec<i64> = (0..p).map(|i| [-1, 1, 4][i % 3]).collect();
    Dataset::from_raw_labels("rand", m, &raw, Split::Train).unwrap()
}

fn sine_dataset(p: usize, k: usize) -> Dataset {
    let m = Matrix::from_fn(p, k, |i, t| ((t as f64) * 0.13 + i as f64).sin() * (1.0 + i as f64 * 0.1));
    let raw: Vec<i64> = (0..p as i64).map(|i| i % 2).collect();
    Dataset::from_raw_labels("sine", m, &raw, Split::Train).unwrap()
}

fn noise_power(clean: &Dataset, noisy: &Dataset) -> f64 {
    (noisy.patterns() - clean.patterns()).iter().map(|v| v * v).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialize_round_trips(p in 1usize..12, k in 1usize..30, seed in any::<u64>()) {
        let d = random_dataset(p, k, seed);
        let back = parse_ucr_str(&to_ucr_string(&d), "rand", Split::Train).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn noise_preserves_labels_and_shape(p in 1usize..10, k in 1usize..40, snr in -5.0f64..80.0, seed in any::<u64>()) {
        let d = random_dataset(p, k, seed);
        let noisy = inject_noise(&d, &NoiseSpec::new(snr, seed)).unwrap();
        prop_assert_eq!(noisy.labels(), d.labels());
        prop_assert_eq!(noisy.label_map(), d.label_map());
        prop_assert_eq!(noisy.patterns().shape(), d.patterns().shape());
    }

    #[test]
    fn lower_snr_means_more_noise(a in -5.0f64..60.0, gap in 0.01f64..30.0, seed in any::<u64>()) {
        let d = random_dataset(4, 16, seed ^ 1);
        let strong = inject_noise(&d, &NoiseSpec::new(a, seed)).unwrap();
        let weak = inject_noise(&d, &NoiseSpec::new(a + gap, seed)).unwrap();
        prop_assert!(noise_power(&d, &strong) > noise_power(&d, &weak));
    }

    #[test]
    fn self_normalisation_gives_unit_columns(p in 2usize..30, k in 1usize..10, seed in any::<u64>()) {
        let d = random_dataset(p, k, seed);
        let z = normalize(&d, &d).unwrap();
        for col in z.patterns().column_iter() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-12, "mean {}", mean);
            prop_assert!((std - 1.0).abs() < 1e-9, "std {}", std);
        }
    }
}

#[test]
fn train_stats_do_not_centre_test() {
    let train = random_dataset(20, 5, 1);
    let test = Dataset::from_raw_labels("t", train.patterns().map(|v| v + 10.0), &[1; 20], Split::Test).unwrap();
    let z = normalize(&test, &train).unwrap();
    let mean = z.patterns().column(0).sum() / 20.0;
    assert!(mean > 1.0, "{mean}");
}

#[test]
fn dataset_snr_lands_within_half_db() {
    let d = sine_dataset(100, 200);
    for (snr, lo, hi) in [(50.0, 49.5, 50.5), (10.0, 9.5, 10.5), (1.0, 0.5, 1.5), (0.5, 0.3, 0.7)] {
        for seed in 0..5 {
            let noisy = inject_noise(&d, &NoiseSpec::new(snr, seed)).unwrap();
            let got = measured_snr(&d, &noisy).unwrap();
            assert!((lo..=hi).contains(&got), "snr {snr} seed {seed}: {got}");
        }
    }
}

#[test]
fn single_long_pattern_snr_within_half_db() {
    // One pattern's SNR estimate has spread ~ 6.1/sqrt(K) dB, so +-0.5 dB
    // needs K in the thousands.
    let d = sine_dataset(1, 4096);
    for snr in [50.0, 10.0, 1.0, 0.5] {
        let noisy = inject_noise(&d, &NoiseSpec::new(snr, 11)).unwrap();
        let got = measured_snr(&d, &noisy).unwrap();
        assert!((got - snr).abs() <= 0.5, "{snr}: {got}");
    }
}

#[test]
fn noise_is_deterministic_and_split_dependent() {
    let d = sine_dataset(3, 50);
    let a = inject_noise(&d, &NoiseSpec::new(10.0, 4)).unwrap();
    let b = inject_noise(&d, &NoiseSpec::new(10.0, 4)).unwrap();
    assert_eq!(a, b);
    let t = inject_noise(&d.clone().with_split(Split::Test), &NoiseSpec::new(10.0, 4)).unwrap();
    assert_ne!(t.patterns(), a.patterns());
}
