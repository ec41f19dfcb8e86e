mod common;

use std::collections::HashMap;

use common::closed_loop::{default_user, train_agents};
use neuroloop::orchestrator::sim::{AnswerModel, AnswerParams, MwlDistribution, ResponseTable, StrategyResponses};
use neuroloop::orchestrator::{generate_dataset, simulate, BehaviorPolicy, SimPolicy, SimulatedUser};
use neuroloop::rl::{RewardWeights, State, N_ACTIONS, N_STATES};
use neuroloop::{Action, Difficulty, Layout, MwlCategory, StrategyKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_critical(dof: usize) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999)
}

#[test]
fn logged_actions_follow_the_behavior_policy() {
    let weights = [3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0];
    let behavior = BehaviorPolicy::Weights(weights);
    let probs = behavior.probabilities().unwrap();
    let data = generate_dataset(&default_user(), &behavior, 10_000, Layout::Distribution).unwrap();

    let mut counts = vec![[0usize; N_ACTIONS]; N_STATES];
    for t in &data {
        counts[t.state.index()][t.action.index()] += 1;
        assert_eq!(t.behavior_prob, Some(probs[t.action.index()]));
    }
    let mut stat = 0.0;
    for row in &counts {
        let n: usize = row.iter().sum();
        for (a, &c) in row.iter().enumerate() {
            let e = n as f64 * probs[a];
            stat += (c as f64 - e).powi(2) / e;
        }
    }
    let dof = N_STATES * (N_ACTIONS - 1);
    assert!(stat < chi_square_critical(dof), "chi2 {stat:.1} on {dof} dof");

    // states are uniform too
    let expected = data.len() as f64 / N_STATES as f64;
    let state_stat: f64 = counts.iter().map(|r| (r.iter().sum::<usize>() as f64 - expected).powi(2) / expected).sum();
    assert!(state_stat < chi_square_critical(N_STATES - 1), "state chi2 {state_stat:.1}");
}

#[test]
fn outcomes_follow_the_response_table() {
    let user = default_user();
    let data = generate_dataset(&user, &BehaviorPolicy::Uniform, 10_000, Layout::Graph).unwrap();
    let mut counts: HashMap<(Difficulty, StrategyKind), [usize; 3]> = HashMap::new();
    for t in &data {
        counts.entry((t.state.difficulty, t.action.kind())).or_default()[t.post_mwl.index()] += 1;
    }
    let mut stat = 0.0;
    let mut dof = 0;
    for ((d, k), row) in &counts {
        let n: usize = row.iter().sum();
        let dist = user.responses.get(*d, *k);
        for c in MwlCategory::ALL {
            let e = n as f64 * dist.prob(c);
            stat += (row[c.index()] as f64 - e).powi(2) / e;
        }
        dof += 2;
    }
    assert!(stat < chi_square_critical(dof), "chi2 {stat:.1} on {dof} dof");
}

fn degenerate_user() -> SimulatedUser {
    let always = |c: MwlCategory| match c {
        MwlCategory::Low => MwlDistribution::new(1.0, 0.0, 0.0),
        MwlCategory::Optimal => MwlDistribution::new(0.0, 1.0, 0.0),
        MwlCategory::High => MwlDistribution::new(0.0, 0.0, 1.0),
    };
    let table = StrategyResponses {
        none: always(MwlCategory::High),
        partial: always(MwlCategory::Low),
        full: always(MwlCategory::Optimal),
    };
    SimulatedUser {
        responses: ResponseTable { low: table, high: table },
        answers: AnswerModel {
            low: AnswerParams { accuracy: 1.0, rt_median_ms: 4_000.0, rt_sigma: 0.0 },
            optimal: AnswerParams { accuracy: 1.0, rt_median_ms: 6_000.0, rt_sigma: 0.0 },
            high: AnswerParams { accuracy: 0.0, rt_median_ms: 12_000.0, rt_sigma: 0.0 },
        },
        seed: 5,
    }
}

#[test]
fn degenerate_table_gives_closed_form_metrics() {
    let user = degenerate_user();
    let w = RewardWeights { mwl: 1.0, accuracy: 0.5, reaction_time: 1.0, rt_cap_ms: 24_000.0 };
    let report = simulate(&user, Layout::Graph, &[SimPolicy::AlwaysNoAdaptation, SimPolicy::Oracle], 1_000, &w).unwrap();

    let none = report.policy("always_no_adaptation").unwrap();
    assert_eq!(none.optimal_mwl_rate, 0.0);
    assert_eq!(none.mean_accuracy, 0.0);
    assert_eq!(none.mean_reaction_time_ms, 12_000.0);
    assert!((none.mean_reward - (-0.5)).abs() < 1e-12);

    // optimal: 1 + 0.5 - 0.25 beats low: 0 + 0.5 - 1/6
    let oracle = report.policy("oracle").unwrap();
    assert_eq!(oracle.optimal_mwl_rate, 1.0);
    assert_eq!(oracle.mean_accuracy, 1.0);
    assert_eq!(oracle.mean_reaction_time_ms, 6_000.0);
    assert!((oracle.mean_reward - 1.25).abs() < 1e-12);
    assert!((user.expected_reward(Difficulty::High, Action::FullAdaptation, &w) - 1.25).abs() < 1e-12);
}

#[test]
fn oracle_reward_matches_its_expectation() {
    let user = default_user();
    let w = RewardWeights::default();
    let n = 10_000;
    let report = simulate(&user, Layout::Timeline, &[SimPolicy::Oracle], n, &w).unwrap();
    let expected = Difficulty::ALL.iter().map(|&d| user.best_actions(d, &w).0).sum::<f64>() / 2.0;
    let sd = (expected * (1.0 - expected) / n as f64).sqrt() + 0.5 * 0.15 / (n as f64).sqrt();
    let got = report.policy("oracle").unwrap().mean_reward;
    assert!((got - expected).abs() < 4.0 * sd, "{got} vs {expected}");
}

#[test]
fn trained_agent_beats_no_adaptation() {
    let user = default_user();
    let agents = train_agents(&user, 5_000);
    for table in &agents {
        let policies = [SimPolicy::Agent(table), SimPolicy::AlwaysNoAdaptation, SimPolicy::Random];
        let r = simulate(&user, table.layout, &policies, 10_000, &RewardWeights::default()).unwrap();
        let agent = r.policy("agent").unwrap().optimal_mwl_rate;
        let base = r.policy("always_no_adaptation").unwrap().optimal_mwl_rate;
        assert!(agent > base, "{}: agent {agent} vs baseline {base}", table.layout);
    }
}

#[test]
fn trained_agent_reward_per_state_is_near_the_argmax() {
    let user = default_user();
    let w = RewardWeights::default();
    let agents = train_agents(&user, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(common::closed_loop::SEED);
    let mut misses = Vec::new();
    for table in &agents {
        for s in State::all() {
            let action = table.greedy(s);
            let n = 10_000;
            let hits = (0..n).filter(|_| user.respond(s.difficulty, action, &mut rng).post_mwl == MwlCategory::Optimal).count();
            let mc = hits as f64 / n as f64;
            let (best, _) = user.best_actions(s.difficulty, &w);
            if (mc - best).abs() > 0.02 {
                misses.push(format!("{} state {}: {action} gives {mc:.3}, best {best:.3}", table.layout, s.index()));
            }
        }
    }
    assert!(misses.is_empty(), "{misses:#?}");
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn same_seed_same_bytes() {
    let run = || {
        let user = SimulatedUser { seed: 99, ..SimulatedUser::default() };
        let data = generate_dataset(&user, &BehaviorPolicy::Uniform, 2_000, Layout::Graph).unwrap();
        let mut buf = Vec::new();
        neuroloop::rl::write_dataset(&mut buf, &data).unwrap();
        let agents = train_agents(&user, 2_000);
        let tables: String = agents.iter().map(|t| t.to_json().unwrap()).collect();
        let report = simulate(&user, Layout::Graph, &[SimPolicy::Agent(&agents[0]), SimPolicy::Random], 2_000, &RewardWeights::default()).unwrap();
        (digest(&buf), digest(tables.as_bytes()), digest(serde_json::to_string(&report).unwrap().as_bytes()))
    };
    assert_eq!(run(), run());
    let other = SimulatedUser { seed: 100, ..SimulatedUser::default() };
    let a = generate_dataset(&other, &BehaviorPolicy::Uniform, 50, Layout::Graph).unwrap();
    let b = generate_dataset(&SimulatedUser { seed: 99, ..other }, &BehaviorPolicy::Uniform, 50, Layout::Graph).unwrap();
    assert_ne!(a, b);
}

#[test]
fn zero_behavior_weight_is_a_coverage_error() {
    let behavior = BehaviorPolicy::Weights([1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    let err = generate_dataset(&default_user(), &behavior, 10, Layout::Graph).unwrap_err();
    assert!(err.to_string().contains("partial_shape"), "{err}");
}
