//! Echo state network recurrent autoencoders for feature extraction.
//!
//! The crate trains four reservoir/random-projection autoencoders
//! (basic and multi-layer ESN-RAE, basic and multi-layer ELM-AE) by
//! pseudo-inverse readout regression, ties the encoder input weights to the
//! transposed decoder, and uses the recomputed hidden states as features for
//! a linear classifier. [`bench`] drives the full encode → classify pipeline
//! over clean and noise-corrupted UCR-style datasets.
//!
//! ```no_run
//! use esnrae::dataio::{parse_ucr, normalize};
//! use esnrae::rae::{fit, encode, AutoencoderKind, RaeTrainSpec};
//! use esnrae::presets;
//!
//! let train = parse_ucr("ECG200/ECG200_TRAIN.tsv")?;
//! let test = parse_ucr("ECG200/ECG200_TEST.tsv")?;
//! let (train, test) = (normalize(&train, &train)?, normalize(&test, &train)?);
//!
//! let cfg = presets::lookup("ecg200").unwrap().reservoir_config(train.length(), 1);
//! let spec = RaeTrainSpec::new(cfg, 7);
//! let model = fit(&train, &spec, AutoencoderKind::EsnRae)?;
//! let test_features = encode(&model, &test)?;
//! assert_eq!(test_features.shape(), (150, 100));
//! # Ok::<(), esnrae::Error>(())
//! ```

pub mod bench;
pub mod classify;
pub mod container;
pub mod dataio;
mod error;
pub mod numerics;
pub mod presets;
pub mod rae;
pub mod reservoir;

pub use error::{Error, Result};
pub use numerics::Matrix;
