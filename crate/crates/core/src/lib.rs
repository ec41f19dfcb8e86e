//! Closed-loop neuroadaptive dashboard pipeline.
//!
//! EEG epochs (synthetic or replayed) flow through band-power extraction and
//! a quantile-based workload estimator. Per-layout Q-tables trained offline
//! pick an adaptation, the catalogue turns it into dashboard operations, and
//! an in-process topic broker connects the stages and feeds a WebSocket.
//!
//! Stage by stage:
//! - [`ingest`]: epochs from [`ingest::SyntheticSource`] or replay CSV files.
//! - [`dsp`]: Butterworth band-pass, periodogram and band power.
//! - [`mwl`]: calibration quartiles and the combined workload category.
//! - [`rl`]: offline training, evaluation and online action selection.
//! - [`adapt`]: the adaptation catalogue and the `/api/state` snapshot.
//! - [`gateway`]: topics, subscriptions, `/ws/dashboard`, `/api/metrics`.
//! - [`orchestrator`]: config, simulated user, live loop and CLI commands.

pub mod adapt;
pub mod domain;
pub mod dsp;
pub mod gateway;
pub mod ingest;
pub mod mwl;
pub mod orchestrator;
pub mod rl;

pub use domain::{Action, Attribute, Difficulty, Layout, MwlCategory, StrategyKind};
