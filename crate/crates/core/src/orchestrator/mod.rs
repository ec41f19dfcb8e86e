//! Wiring, configuration, the simulated user and the command handlers
//! behind the `neuroloop` binary.

pub mod commands;
pub mod config;
pub mod session;
pub mod sim;

pub use config::{Config, CONFIG_ENV};
pub use session::{run_loop, start_loop, LoopInputs, RunReport, RunningLoop, StartupError};
pub use sim::{generate_dataset, simulate, BehaviorPolicy, SimPolicy, SimReport, SimulatedUser};
