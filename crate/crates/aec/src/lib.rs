//! Autoencoder-correlation (AEC) health monitoring and prognostics for
//! machine bearings.
//!
//! During a run-to-failure test, a sparse tied-weight autoencoder is trained
//! directly on raw vibration records and used as an unsupervised feature
//! extractor. The Pearson correlation of each sample's features with the
//! first (healthy) sample's features, min-max normalized and smoothed with a
//! moving-average filter, is the *AEC rate*: a health indicator near 1 while
//! the bearing is healthy that falls as degradation sets in. A threshold-lag
//! detector on the rate locates the degradation starting point.
//!
//! # Modules
//!
//! - [`ingest`] — record parsing, catalog assembly, input scaling, and a
//!   deterministic synthetic run-to-failure generator.
//! - [`autoencoder`] — forward pass, composite cost (reconstruction + L2 +
//!   KL sparsity), and its exact analytic gradient.
//! - [`scg`] — full-batch scaled conjugate gradient training.
//! - [`trend`] — correlation trend analysis producing the AEC rate.
//! - [`detect`] — degradation-onset detection, prediction accuracy, and
//!   RMS / kurtosis baselines.
//! - [`pipeline`] — end-to-end monitoring and online-prognostic runs with
//!   reproducible outputs.
//!
//! # Example
//!
//! ```
//! use aec::ingest::{synth_run_to_failure, scale_catalog, ScalingMode, SynthConfig};
//! use aec::autoencoder::AeConfig;
//! use aec::scg::{init_params, train, TrainConfig};
//! use aec::trend::{aec_rate, FeatureMatrix};
//! use aec::detect::{detect_degradation, DetectorConfig};
//!
//! // Small synthetic run-to-failure catalog with an onset at sample 50.
//! let catalog = synth_run_to_failure(&SynthConfig {
//!     n_samples: 80,
//!     sample_len: 128,
//!     change_point: 50,
//!     severity_growth: 0.08,
//!     seed: 7,
//! })?;
//! let scaled = scale_catalog(&catalog, ScalingMode::GlobalMinmax)?;
//! let x = scaled.to_matrix();
//!
//! // Train the autoencoder and encode every sample.
//! let mut config = AeConfig::new(x.ncols(), 12);
//! config.seed = 7;
//! let train_config = TrainConfig { max_epochs: 40, ..TrainConfig::default() };
//! let (params, _report) = train(init_params(&config), x.view(), &config, &train_config)?;
//! let features = FeatureMatrix::from_array(aec::autoencoder::encode_batch(&params, x.view())?)?;
//!
//! // Health rate and degradation onset.
//! let series = aec_rate(&features, 0, 5)?;
//! let detector = DetectorConfig { theta: 0.9, lag: 20, warmup: 0 };
//! let report = detect_degradation(&series.filtered, &detector, "demo")?;
//! assert!(report.degradation_start.is_some());
//! # Ok::<(), aec::Error>(())
//! ```

pub mod autoencoder;
pub mod detect;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod scg;
pub mod trend;

pub use error::{Error, Result};
