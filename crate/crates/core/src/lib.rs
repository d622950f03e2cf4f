//! IPCW-adjusted win statistics (win ratio, win odds, net benefit) for
//! prioritized time-to-event endpoints under right-censoring.
//!
//! The usual flow is [`Dataset`] → [`estimate_win_probabilities`] →
//! [`inference::analyze`], or [`simulate::run_replications`] for operating
//! characteristics of a simulated design.

pub mod baseline;
pub mod config;
pub mod data;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod io;
pub mod kernel;
pub mod km;
pub mod normal;
pub mod parallel;
pub mod simulate;

pub use config::{AnalysisConfig, MarginMode, TauSpec, VarianceMode};
pub use data::{CensoringRecord, Dataset, Group, SubjectRecord};
pub use error::{Result, WinError};
pub use estimate::{
    estimate_win_probabilities, estimate_with_weight_provider, naive_win_probabilities, renormalize,
    win_statistics, WeightProvider, WinProbEstimate, WinStatistics,
};
pub use km::{HazardMode, Side, StepSurvival};
