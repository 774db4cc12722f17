//! Core of the kosm boarding-house rent-price regressor.
//!
//! Everything here is pure computation over in-memory values and only needs
//! `alloc`: record cleansing and descriptive statistics, the categorical
//! encoder with frozen normalization, a dense ReLU regressor trained with
//! Adam on mean absolute error, function-preserving morphism search, and the
//! `.kosm` lite bundle codec. File and network IO live in the `kosm` crate.
//!
//! ```
//! use kosm_core::neuralnet::{param_count, ArchSpec};
//!
//! let arch = ArchSpec::new(4, vec![256, 512, 128]).unwrap();
//! let counts = param_count(&arch, 4);
//! assert_eq!(counts.total, 198_666);
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bundle;
pub mod dataset;
pub mod encoding;
pub mod matrix;
pub mod nas;
pub mod neuralnet;

mod rng;

pub use bundle::{ModelBundle, Prediction};
pub use dataset::{CleanDataset, RawRecord, Record, SplitSpec, StatsReport};
pub use encoding::FeatureEncoder;
pub use matrix::Matrix;
pub use neuralnet::{ArchSpec, MlpModel, TrainConfig};
