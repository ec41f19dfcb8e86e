//! Off-policy evaluation of a trained table's greedy policy on logged data.

use serde::Serialize;

use super::{estimate_behavior_probs, reward, LoggedTransition, QTable, RewardWeights, RlError, State, N_ACTIONS, N_STATES};
use crate::domain::{Action, Layout};

#[derive(Debug, Clone, Serialize)]
pub struct StatePolicy {
    pub state: State,
    pub action: Action,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub layout: Layout,
    pub records: usize,
    /// Mean reward of the logging policy.
    pub behavior_value: f64,
    /// Importance-sampling estimate of the greedy policy's mean reward.
    pub greedy_is_value: f64,
    /// Self-normalised variant of the same estimate.
    pub greedy_wis_value: f64,
    /// Records whose logged action equals the greedy choice.
    pub matched_records: usize,
    pub unvisited_cells: usize,
    pub policy: Vec<StatePolicy>,
}

pub fn evaluate(table: &QTable, dataset: &[LoggedTransition], weights: &RewardWeights) -> Result<EvalReport, RlError> {
    let mut records: Vec<LoggedTransition> = dataset.iter().filter(|t| t.layout == table.layout).cloned().collect();
    if records.is_empty() {
        return Err(RlError::Data(format!("no records for layout {}", table.layout)));
    }
    estimate_behavior_probs(&mut records, false);

    let n = records.len() as f64;
    let (mut behavior, mut is_sum, mut w_sum, mut matched) = (0.0, 0.0, 0.0, 0usize);
    for t in &records {
        let r = reward(t, weights);
        behavior += r;
        if table.greedy(t.state) == t.action {
            let w = 1.0 / t.behavior_prob.expect("filled above");
            is_sum += w * r;
            w_sum += w;
            matched += 1;
        }
    }

    let policy = State::all()
        .map(|state| {
            let action = table.greedy(state);
            StatePolicy { state, action, q: table.get(state, action) }
        })
        .collect();
    let unvisited_cells = table.visit_counts().iter().filter(|&&c| c == 0).count();
    debug_assert!(unvisited_cells <= N_STATES * N_ACTIONS);

    Ok(EvalReport {
        layout: table.layout,
        records: records.len(),
        behavior_value: behavior / n,
        greedy_is_value: is_sum / n,
        greedy_wis_value: if w_sum > 0.0 { is_sum / w_sum } else { 0.0 },
        matched_records: matched,
        unvisited_cells,
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MwlCategory;
    use crate::rl::{train, TrainingConfig};

    #[test]
    fn greedy_on_two_action_log() {
        // state 0: no_adaptation always High, full always Optimal, logged 50/50
        let s = State::from_index(0).unwrap();
        let mk = |action, post| LoggedTransition {
            layout: Layout::Distribution,
            state: s,
            action,
            post_mwl: post,
            accuracy: 1,
            reaction_time_ms: 100.0,
            behavior_prob: Some(0.5),
        };
        let data: Vec<_> = (0..10)
            .flat_map(|_| [mk(Action::NoAdaptation, MwlCategory::High), mk(Action::FullAdaptation, MwlCategory::Optimal)])
            .collect();
        let table = train(&data, Layout::Distribution, &TrainingConfig::default()).unwrap().table;
        let rep = evaluate(&table, &data, &RewardWeights::default()).unwrap();
        assert_eq!(rep.records, 20);
        assert!((rep.behavior_value - 0.5).abs() < 1e-12);
        assert!((rep.greedy_is_value - 1.0).abs() < 1e-12);
        assert!((rep.greedy_wis_value - 1.0).abs() < 1e-12);
        assert_eq!(rep.matched_records, 10);
        assert_eq!(rep.policy[0].action, Action::FullAdaptation);
    }
}
