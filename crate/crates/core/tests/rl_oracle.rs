mod common;

use common::brute_force_cell_means;
use neuroloop::orchestrator::{generate_dataset, BehaviorPolicy, SimulatedUser};
use neuroloop::rl::{reward, train, LoggedTransition, QTable, RewardWeights, State, StepSchedule, TargetPolicy, TrainingConfig, N_ACTIONS, N_STATES};
use neuroloop::{Action, Layout, MwlCategory};
use proptest::prelude::*;

fn skewed_dataset(n: usize, seed: u64) -> Vec<LoggedTransition> {
    let user = SimulatedUser { seed, ..SimulatedUser::default() };
    let behavior = BehaviorPolicy::Weights([4.0, 1.0, 1.0, 2.0, 1.0, 1.0, 0.5]);
    generate_dataset(&user, &behavior, n, Layout::Graph).unwrap()
}

fn mixed_weights() -> RewardWeights {
    RewardWeights { mwl: 1.0, accuracy: 0.5, reaction_time: 0.25, rt_cap_ms: 20_000.0 }
}

#[test]
fn frozen_target_equals_per_cell_mean() {
    let data = skewed_dataset(10_000, 17);
    let cfg = TrainingConfig { reward: mixed_weights(), weight_clip: 1.5, ..TrainingConfig::default() };
    let out = train(&data, Layout::Graph, &cfg).unwrap();
    assert!(out.converged, "delta {}", out.last_delta);
    let expected = brute_force_cell_means(&data, &cfg.reward, cfg.weight_clip);
    for s in 0..N_STATES {
        for a in 0..N_ACTIONS {
            let q = out.table.row(s)[a];
            let want = expected.get(&(s, a)).copied().unwrap_or(0.0);
            assert!((q - want).abs() <= 1e-6, "cell ({s},{a}): {q} vs {want}");
        }
    }
}

#[test]
fn coupled_constant_step_converges() {
    let data = skewed_dataset(10_000, 3);
    let cfg = TrainingConfig {
        target: TargetPolicy::Coupled,
        step: StepSchedule::Constant,
        alpha: 0.1,
        epsilon: 0.1,
        ..TrainingConfig::default()
    };
    let out = train(&data, Layout::Graph, &cfg).unwrap();
    assert!(out.converged && out.sweeps <= 500, "sweeps {} delta {}", out.sweeps, out.last_delta);
}

#[test]
fn training_is_bitwise_deterministic() {
    let data = skewed_dataset(3_000, 9);
    for target in [TargetPolicy::FrozenUniform, TargetPolicy::Coupled] {
        let cfg = TrainingConfig { target, ..TrainingConfig::default() };
        let a = train(&data, Layout::Graph, &cfg).unwrap().table;
        let b = train(&data, Layout::Graph, &cfg).unwrap().table;
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}

#[test]
fn model_file_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = train(&skewed_dataset(500, 1), Layout::Graph, &TrainingConfig::default()).unwrap().table;
    let path = dir.path().join("graph.json");
    table.save(&path).unwrap();
    assert_eq!(QTable::load(&path).unwrap(), table);
}

fn arb_transition() -> impl Strategy<Value = LoggedTransition> {
    (0..N_STATES, 0..N_ACTIONS, 0usize..3, 0u8..=1, 1.0f64..40_000.0, 0.01f64..=1.0).prop_map(|(s, a, m, acc, rt, mu)| {
        LoggedTransition {
            layout: Layout::Timeline,
            state: State::from_index(s).unwrap(),
            action: Action::from_index(a).unwrap(),
            post_mwl: MwlCategory::ALL[m],
            accuracy: acc,
            reaction_time_ms: rt,
            behavior_prob: Some(mu),
        }
    })
}

fn arb_config() -> impl Strategy<Value = TrainingConfig> {
    (
        prop_oneof![Just(TargetPolicy::FrozenUniform), Just(TargetPolicy::Coupled)],
        prop_oneof![Just(StepSchedule::VisitAverage), Just(StepSchedule::Constant)],
        0.01f64..=1.0,
        0.0f64..=1.0,
        0.5f64..20.0,
        (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
    )
        .prop_map(|(target, step, alpha, epsilon, clip, (m, acc, rt))| TrainingConfig {
            target,
            step,
            alpha,
            epsilon,
            weight_clip: clip,
            max_sweeps: 50,
            reward: RewardWeights { mwl: m, accuracy: acc, reaction_time: rt, rt_cap_ms: 30_000.0 },
            ..TrainingConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_values_are_bounded(data in prop::collection::vec(arb_transition(), 1..200), cfg in arb_config()) {
        let out = train(&data, Layout::Timeline, &cfg).unwrap();
        let bound = cfg.weight_clip * cfg.reward.max_abs_reward() + 1e-9;
        for &q in out.table.values() {
            prop_assert!(q.abs() <= bound, "{q} > {bound}");
        }
    }

    #[test]
    fn unvisited_cells_stay_zero(data in prop::collection::vec(arb_transition(), 1..60), cfg in arb_config()) {
        let out = train(&data, Layout::Timeline, &cfg).unwrap();
        for (i, (&q, &n)) in out.table.values().iter().zip(out.table.visit_counts()).enumerate() {
            let logged = data.iter().any(|t| t.state.index() * N_ACTIONS + t.action.index() == i);
            prop_assert_eq!(n > 0, logged);
            if n == 0 {
                prop_assert_eq!(q, 0.0);
            }
        }
    }

    #[test]
    fn greedy_choice_ignores_positive_reward_scale(data in prop::collection::vec(arb_transition(), 1..200), scale in 0.01f64..100.0) {
        let base = TrainingConfig { reward: RewardWeights { mwl: 1.0, accuracy: 0.3, reaction_time: 0.2, rt_cap_ms: 30_000.0 }, ..TrainingConfig::default() };
        let scaled = TrainingConfig {
            reward: RewardWeights {
                mwl: base.reward.mwl * scale,
                accuracy: base.reward.accuracy * scale,
                reaction_time: base.reward.reaction_time * scale,
                ..base.reward
            },
            ..base
        };
        let a = train(&data, Layout::Timeline, &base).unwrap().table;
        let b = train(&data, Layout::Timeline, &scaled).unwrap().table;
        for s in State::all() {
            // the scaled argmax must be one of the original maximisers, up to rounding
            let row = a.row(s.index());
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let chosen = b.greedy(s).index();
            prop_assert!(best - row[chosen] <= 1e-9 * best.abs().max(1.0), "state {}: {:?}", s.index(), row);
        }
    }

    #[test]
    fn reward_is_within_declared_bound(t in arb_transition(), m in -3.0f64..3.0, acc in -3.0f64..3.0, rt in -3.0f64..3.0) {
        let w = RewardWeights { mwl: m, accuracy: acc, reaction_time: rt, rt_cap_ms: 10_000.0 };
        prop_assert!(reward(&t, &w).abs() <= w.max_abs_reward() + 1e-12);
    }
}
