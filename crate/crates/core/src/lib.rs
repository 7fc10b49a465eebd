//! Web workload forecasting toolkit.
//!
//! The crate turns raw web-server trace logs into request-count time series
//! (requests per day, requests per second) and models them with small
//! feed-forward time-delay networks trained by Levenberg-Marquardt or by
//! per-row incremental updates.
//!
//! Modules follow the data flow:
//!
//! - [`trace`]: decode trace files, count requests per epoch second and per day.
//! - [`series`]: normalization, delay embedding, contiguous train/val/test splits.
//! - [`ann`]: the layered network, weight initialization and the error Jacobian.
//! - [`train`]: batch Levenberg-Marquardt, incremental training, restarts.
//! - [`simulate`]: open- and closed-loop simulation plus MSE and R.
//! - [`experiments`]: the builtin case catalog, case runner and synthetic workloads.

pub mod ann;
mod error;
pub mod experiments;
pub mod series;
pub mod simulate;
pub mod train;
pub mod trace;
mod tsv;

pub use ann::{Layer, LoopMode, Network, NetworkShape, Transfer};
pub use error::{Error, Result};
pub use experiments::{CaseConfig, CaseResult, DataCatalog, SynthProfile};
pub use series::{NormalizationParams, SplitSpec, Splits, SupervisedDataset, TimeSeries};
pub use simulate::{Prediction, SplitLabel};
pub use train::{TrainConfig, TrainReport};
pub use trace::{DayRequestsSeries, EpochRequestsSeries, MatchCalendar, TraceRecord};

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 42;
