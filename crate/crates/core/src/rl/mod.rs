//! Per-layout tabular Q-learning trained offline from logged transitions.
//!
//! Every episode is a single transition, so the update has no bootstrapped
//! successor term: `Q(s,a) <- Q(s,a) + step * (w * r - Q(s,a))` where `w` is
//! the clipped importance ratio between the target policy and the logging
//! policy. See [`train`] for the sweep/convergence rules.

pub mod dataset;
pub mod eval;
pub mod policy;
pub mod serve;
pub mod train;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Action, Difficulty, Layout, MwlCategory, StrategyKind};

pub use dataset::{estimate_behavior_probs, read_dataset, write_dataset};
pub use eval::{evaluate, EvalReport};
pub use policy::{select_action, PolicyMode};
pub use serve::{serve, AgentPool, StrategyRequest};
pub use train::{importance_weight, reward, train, StepSchedule, TargetPolicy, TrainOutcome, TrainingConfig, RewardWeights};

pub const N_STATES: usize = 18;
pub const N_ACTIONS: usize = Action::COUNT;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("training error: {0}")]
    Training(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model error: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// What the agent conditions on: estimated workload, question difficulty
/// and the adaptation currently on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub mwl: MwlCategory,
    pub difficulty: Difficulty,
    pub current_strategy: StrategyKind,
}

impl State {
    /// `mwl * 6 + difficulty * 3 + strategy`, a bijection onto `0..18`.
    pub fn index(&self) -> usize {
        self.mwl.index() * 6 + self.difficulty.index() * 3 + self.current_strategy.index()
    }

    pub fn from_index(index: usize) -> Option<State> {
        (index < N_STATES).then(|| State {
            mwl: MwlCategory::ALL[index / 6],
            difficulty: Difficulty::ALL[(index / 3) % 2],
            current_strategy: StrategyKind::ALL[index % 3],
        })
    }

    pub fn all() -> impl Iterator<Item = State> {
        (0..N_STATES).filter_map(State::from_index)
    }
}

/// One offline training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedTransition {
    pub layout: Layout,
    pub state: State,
    pub action: Action,
    pub post_mwl: MwlCategory,
    pub accuracy: u8,
    pub reaction_time_ms: f64,
    /// Probability the logging policy gave to `action` in `state`. When
    /// missing it is estimated from the dataset before training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior_prob: Option<f64>,
}

impl LoggedTransition {
    pub fn validate(&self) -> Result<(), RlError> {
        if self.accuracy > 1 {
            return Err(RlError::Data(format!("accuracy must be 0 or 1, got {}", self.accuracy)));
        }
        if !(self.reaction_time_ms > 0.0 && self.reaction_time_ms.is_finite()) {
            return Err(RlError::Data(format!("reaction_time_ms must be positive, got {}", self.reaction_time_ms)));
        }
        if let Some(p) = self.behavior_prob {
            if !(p > 0.0 && p <= 1.0) {
                return Err(RlError::Data(format!("behavior_prob must be in (0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Dense `18 x 7` action-value table for one layout, plus update counts.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub layout: Layout,
    values: Vec<f64>,
    visit_counts: Vec<u64>,
}

/// On-disk model: `{layout, n_states, n_actions, q, visit_counts}`, both
/// arrays row-major by state.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    layout: Layout,
    n_states: usize,
    n_actions: usize,
    q: Vec<f64>,
    visit_counts: Vec<u64>,
}

impl QTable {
    pub fn zeros(layout: Layout) -> Self {
        Self { layout, values: vec![0.0; N_STATES * N_ACTIONS], visit_counts: vec![0; N_STATES * N_ACTIONS] }
    }

    pub fn from_parts(layout: Layout, values: Vec<f64>, visit_counts: Vec<u64>) -> Result<Self, RlError> {
        if values.len() != N_STATES * N_ACTIONS || visit_counts.len() != N_STATES * N_ACTIONS {
            return Err(RlError::Model(format!(
                "expected {} cells, got q={} visit_counts={}",
                N_STATES * N_ACTIONS,
                values.len(),
                visit_counts.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RlError::Model(format!("q[{i}] is not finite")));
        }
        Ok(Self { layout, values, visit_counts })
    }

    pub fn get(&self, state: State, action: Action) -> f64 {
        self.values[cell(state.index(), action.index())]
    }

    pub fn visits(&self, state: State, action: Action) -> u64 {
        self.visit_counts[cell(state.index(), action.index())]
    }

    pub fn row(&self, state_index: usize) -> &[f64] {
        &self.values[state_index * N_ACTIONS..(state_index + 1) * N_ACTIONS]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    /// Argmax of the row, lowest index on ties.
    pub fn greedy(&self, state: State) -> Action {
        Action::from_index(argmax(self.row(state.index()))).expect("row has N_ACTIONS entries")
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn bump_visit(&mut self, s: usize, a: usize) -> u64 {
        let c = &mut self.visit_counts[cell(s, a)];
        *c += 1;
        *c
    }

    pub fn to_json(&self) -> Result<String, RlError> {
        let file = ModelFile {
            layout: self.layout,
            n_states: N_STATES,
            n_actions: N_ACTIONS,
            q: self.values.clone(),
            visit_counts: self.visit_counts.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, RlError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.n_states != N_STATES || file.n_actions != N_ACTIONS {
            return Err(RlError::Model(format!(
                "model shape {}x{} does not match {N_STATES}x{N_ACTIONS}",
                file.n_states, file.n_actions
            )));
        }
        QTable::from_parts(file.layout, file.q, file.visit_counts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RlError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RlError> {
        QTable::from_json(&fs::read_to_string(path)?)
    }
}

pub(crate) fn cell(s: usize, a: usize) -> usize {
    s * N_ACTIONS + a
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
