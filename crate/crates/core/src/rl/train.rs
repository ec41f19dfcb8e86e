use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{argmax, cell, LoggedTransition, QTable, RlError, N_ACTIONS};
use crate::domain::{Layout, MwlCategory};

/// `r = mwl * [post == Optimal] + accuracy * acc - reaction_time * min(rt / rt_cap, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub mwl: f64,
    pub accuracy: f64,
    pub reaction_time: f64,
    pub rt_cap_ms: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { mwl: 1.0, accuracy: 0.0, reaction_time: 0.0, rt_cap_ms: 30_000.0 }
    }
}

impl RewardWeights {
    /// Largest |r| any transition can produce.
    pub fn max_abs_reward(&self) -> f64 {
        let pos = self.mwl.max(0.0) + self.accuracy.max(0.0) + (-self.reaction_time).max(0.0);
        let neg = (-self.mwl).max(0.0) + (-self.accuracy).max(0.0) + self.reaction_time.max(0.0);
        pos.max(neg)
    }
}

pub fn reward(t: &LoggedTransition, w: &RewardWeights) -> f64 {
    let optimal = if t.post_mwl == MwlCategory::Optimal { 1.0 } else { 0.0 };
    let rt = (t.reaction_time_ms / w.rt_cap_ms).min(1.0);
    w.mwl * optimal + w.accuracy * f64::from(t.accuracy) - w.reaction_time * rt
}

/// Policy whose reward the importance weights re-target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Uniform over the seven actions for the whole run.
    #[default]
    FrozenUniform,
    /// Epsilon-greedy with respect to the table being trained, recomputed
    /// at every update.
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `step = 1 / n`, n = updates applied to the cell so far. The table
    /// is then the running mean of `w * r` per cell.
    #[default]
    VisitAverage,
    /// `step = alpha` for every update.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub tolerance: f64,
    pub weight_clip: f64,
    pub reward: RewardWeights,
    pub target: TargetPolicy,
    pub step: StepSchedule,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            max_sweeps: 500,
            tolerance: 1e-4,
            weight_clip: 10.0,
            reward: RewardWeights::default(),
            target: TargetPolicy::default(),
            step: StepSchedule::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::Training(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must be in [0, 1]");
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be positive");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.weight_clip > 0.0) {
            return bad("weight_clip must be positive");
        }
        if !(self.reward.rt_cap_ms > 0.0) {
            return bad("reward.rt_cap_ms must be positive");
        }
        Ok(())
    }
}

/// Target-policy probability of `action_index` in a row of Q-values.
pub fn target_prob(row: &[f64], action_index: usize, target: TargetPolicy, epsilon: f64) -> f64 {
    let uniform = 1.0 / N_ACTIONS as f64;
    match target {
        TargetPolicy::FrozenUniform => uniform,
        TargetPolicy::Coupled => {
            let explore = epsilon * uniform;
            if argmax(row) == action_index {
                1.0 - epsilon + explore
            } else {
                explore
            }
        }
    }
}

/// `min(pi_target(a|s) / behavior_prob, weight_clip)`.
pub fn importance_weight(t: &LoggedTransition, q: &QTable, cfg: &TrainingConfig) -> Result<f64, RlError> {
    let mu = t.behavior_prob.ok_or_else(|| RlError::Data("behavior_prob missing".into()))?;
    if !(mu > 0.0) {
        return Err(RlError::Data(format!("behavior_prob must be > 0, got {mu}")));
    }
    let pi = target_prob(q.row(t.state.index()), t.action.index(), cfg.target, cfg.epsilon);
    Ok((pi / mu).min(cfg.weight_clip))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub table: QTable,
    pub sweeps: usize,
    /// max |Q_end - Q_start| over the last sweep.
    pub last_delta: f64,
    pub converged: bool,
}

/// Repeated sweeps over `dataset` in the given order until the table moves
/// by less than `tolerance` over a whole sweep, or `max_sweeps` is hit.
pub fn train(dataset: &[LoggedTransition], layout: Layout, cfg: &TrainingConfig) -> Result<TrainOutcome, RlError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(RlError::Training("empty dataset".into()));
    }
    if let Some((i, t)) = dataset.iter().enumerate().find(|(_, t)| t.layout != layout) {
        return Err(RlError::Data(format!("record {i} is for layout {} but training {layout}", t.layout)));
    }
    for (i, t) in dataset.iter().enumerate() {
        t.validate().map_err(|e| RlError::Data(format!("record {i}: {e}")))?;
    }

    let records: Cow<'_, [LoggedTransition]> = if dataset.iter().all(|t| t.behavior_prob.is_some()) {
        Cow::Borrowed(dataset)
    } else {
        tracing::info!("behavior_prob missing from some records; estimating from action frequencies");
        let mut owned = dataset.to_vec();
        super::estimate_behavior_probs(&mut owned, false);
        Cow::Owned(owned)
    };

    let rewards: Vec<f64> = records.iter().map(|t| reward(t, &cfg.reward)).collect();
    let mut table = QTable::zeros(layout);
    let mut sweeps = 0;
    let mut last_delta = f64::INFINITY;
    let mut converged = false;

    while sweeps < cfg.max_sweeps {
        let start = table.values().to_vec();
        for (t, &r) in records.iter().zip(&rewards) {
            let w = importance_weight(t, &table, cfg)?;
            let (s, a) = (t.state.index(), t.action.index());
            let n = table.bump_visit(s, a);
            let step = match cfg.step {
                StepSchedule::Constant => cfg.alpha,
                StepSchedule::VisitAverage => 1.0 / n as f64,
            };
            let q = &mut table.values_mut()[cell(s, a)];
            *q += step * (w * r - *q);
        }
        sweeps += 1;
        last_delta = table.values().iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if last_delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome { table, sweeps, last_delta, converged })
}
