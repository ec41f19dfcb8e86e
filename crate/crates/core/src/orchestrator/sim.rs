//! Simulated analyst for closed-loop evaluation and dataset generation.
//!
//! The response table maps (difficulty, strategy kind) to a distribution
//! over the post-action workload category. Accuracy and reaction time then
//! depend only on that category. All numbers are demo configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::domain::{Action, Difficulty, Layout, MwlCategory, StrategyKind};
use crate::rl::{AgentPool, LoggedTransition, QTable, RewardWeights, State, N_ACTIONS};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("user model: {0}")]
    Model(String),
    #[error("behavior policy gives zero probability to {0}; every action needs coverage")]
    Coverage(&'static str),
    #[error("behavior policy: {0}")]
    Policy(String),
}

/// Probability of each post-action workload category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwlDistribution {
    pub low: f64,
    pub optimal: f64,
    pub high: f64,
}

impl MwlDistribution {
    pub const fn new(low: f64, optimal: f64, high: f64) -> Self {
        Self { low, optimal, high }
    }

    pub fn prob(&self, c: MwlCategory) -> f64 {
        match c {
            MwlCategory::Low => self.low,
            MwlCategory::Optimal => self.optimal,
            MwlCategory::High => self.high,
        }
    }

    fn validate(&self, what: &str) -> Result<(), SimError> {
        let ps = [self.low, self.optimal, self.high];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SimError::Model(format!("{what}: probabilities must lie in [0, 1]")));
        }
        let sum: f64 = ps.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Model(format!("{what}: probabilities sum to {sum}")));
        }
        Ok(())
    }

    /// Inverse-CDF draw in the order Low, Optimal, High.
    fn sample(&self, u: f64) -> MwlCategory {
        if u < self.low {
            MwlCategory::Low
        } else if u < self.low + self.optimal {
            MwlCategory::Optimal
        } else {
            MwlCategory::High
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyResponses {
    pub none: MwlDistribution,
    pub partial: MwlDistribution,
    pub full: MwlDistribution,
}

impl StrategyResponses {
    pub fn get(&self, kind: StrategyKind) -> &MwlDistribution {
        match kind {
            StrategyKind::None => &self.none,
            StrategyKind::Partial => &self.partial,
            StrategyKind::Full => &self.full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    pub low: StrategyResponses,
    pub high: StrategyResponses,
}

impl ResponseTable {
    pub fn get(&self, difficulty: Difficulty, kind: StrategyKind) -> &MwlDistribution {
        match difficulty {
            Difficulty::Low => self.low.get(kind),
            Difficulty::High => self.high.get(kind),
        }
    }
}

impl Default for ResponseTable {
    /// Adaptation helps most on hard questions; on easy ones full adaptation
    /// overshoots and partial adaptation is best.
    fn default() -> Self {
        Self {
            high: StrategyResponses {
                none: MwlDistribution::new(0.1, 0.2, 0.7),
                partial: MwlDistribution::new(0.1, 0.5, 0.4),
                full: MwlDistribution::new(0.05, 0.8, 0.15),
            },
            low: StrategyResponses {
                none: MwlDistribution::new(0.3, 0.6, 0.1),
                partial: MwlDistribution::new(0.25, 0.65, 0.1),
                full: MwlDistribution::new(0.4, 0.5, 0.1),
            },
        }
    }
}

/// Answer behaviour in one workload category: Bernoulli accuracy and a
/// log-normal reaction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerParams {
    pub accuracy: f64,
    pub rt_median_ms: f64,
    pub rt_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerModel {
    pub low: AnswerParams,
    pub optimal: AnswerParams,
    pub high: AnswerParams,
}

impl AnswerModel {
    pub fn get(&self, c: MwlCategory) -> &AnswerParams {
        match c {
            MwlCategory::Low => &self.low,
            MwlCategory::Optimal => &self.optimal,
            MwlCategory::High => &self.high,
        }
    }
}

impl Default for AnswerModel {
    fn default() -> Self {
        Self {
            low: AnswerParams { accuracy: 0.7, rt_median_ms: 10_000.0, rt_sigma: 0.35 },
            optimal: AnswerParams { accuracy: 0.85, rt_median_ms: 8_000.0, rt_sigma: 0.3 },
            high: AnswerParams { accuracy: 0.5, rt_median_ms: 15_000.0, rt_sigma: 0.4 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatedUser {
    pub responses: ResponseTable,
    pub answers: AnswerModel,
    pub seed: u64,
}

/// One sampled reaction to an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub post_mwl: MwlCategory,
    pub correct: bool,
    pub reaction_time_ms: f64,
}

impl SimulatedUser {
    pub fn validate(&self) -> Result<(), SimError> {
        for d in Difficulty::ALL {
            for k in StrategyKind::ALL {
                self.responses.get(d, k).validate(&format!("{d:?}/{k:?}"))?;
            }
        }
        for c in MwlCategory::ALL {
            let a = self.answers.get(c);
            if !(0.0..=1.0).contains(&a.accuracy) || !(a.rt_median_ms > 0.0) || !(a.rt_sigma >= 0.0) {
                return Err(SimError::Model(format!("answer model for {c:?} out of range")));
            }
        }
        Ok(())
    }

    /// Three uniforms per call, always, so runs that share a seed stay in
    /// lock-step whatever the policy chooses.
    pub fn respond<R: Rng + ?Sized>(&self, difficulty: Difficulty, action: Action, rng: &mut R) -> Outcome {
        let (u_mwl, u_acc, u_rt): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let post_mwl = self.responses.get(difficulty, action.kind()).sample(u_mwl);
        let a = self.answers.get(post_mwl);
        let reaction_time_ms = if a.rt_sigma == 0.0 {
            a.rt_median_ms
        } else {
            // inverse CDF keeps exactly one uniform per draw
            lognormal_quantile(a.rt_median_ms, a.rt_sigma, u_rt)
        };
        Outcome { post_mwl, correct: u_acc < a.accuracy, reaction_time_ms }
    }

    /// Exact expected reward of `action` for a question of `difficulty`.
    pub fn expected_reward(&self, difficulty: Difficulty, action: Action, w: &RewardWeights) -> f64 {
        let dist = self.responses.get(difficulty, action.kind());
        MwlCategory::ALL
            .into_iter()
            .map(|c| {
                let a = self.answers.get(c);
                let optimal = if c == MwlCategory::Optimal { 1.0 } else { 0.0 };
                let rt = expected_capped_rt(a.rt_median_ms, a.rt_sigma, w.rt_cap_ms);
                dist.prob(c) * (w.mwl * optimal + w.accuracy * a.accuracy - w.reaction_time * rt)
            })
            .sum()
    }

    /// Actions whose expected reward is maximal for `difficulty` (ties kept).
    pub fn best_actions(&self, difficulty: Difficulty, w: &RewardWeights) -> (f64, Vec<Action>) {
        let values: Vec<f64> = Action::ALL.iter().map(|&a| self.expected_reward(difficulty, a, w)).collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let actions = Action::ALL.into_iter().zip(&values).filter(|(_, &v)| (v - best).abs() < 1e-12).map(|(a, _)| a).collect();
        (best, actions)
    }
}

fn std_normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

fn lognormal_quantile(median: f64, sigma: f64, u: f64) -> f64 {
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    median * (sigma * std_normal_quantile(u)).exp()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `E[min(X / cap, 1)]` for log-normal `X` with the given median and sigma.
pub fn expected_capped_rt(median: f64, sigma: f64, cap: f64) -> f64 {
    if sigma == 0.0 {
        return (median / cap).min(1.0);
    }
    let mu = median.ln();
    let z = (cap.ln() - mu) / sigma;
    let partial_mean = (mu + sigma * sigma / 2.0).exp() * std_normal_cdf(z - sigma);
    partial_mean / cap + (1.0 - std_normal_cdf(z))
}

/// Logging policy for generated datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorPolicy {
    Uniform,
    /// Unnormalised weights in action-index order.
    Weights([f64; N_ACTIONS]),
}

impl BehaviorPolicy {
    pub fn probabilities(&self) -> Result<[f64; N_ACTIONS], SimError> {
        match self {
            BehaviorPolicy::Uniform => Ok([1.0 / N_ACTIONS as f64; N_ACTIONS]),
            BehaviorPolicy::Weights(w) => {
                if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(SimError::Policy("weights must be finite and non-negative".into()));
                }
                if let Some(i) = w.iter().position(|&x| x == 0.0) {
                    return Err(SimError::Coverage(Action::ALL[i].as_str()));
                }
                let total: f64 = w.iter().sum();
                Ok(w.map(|x| x / total))
            }
        }
    }
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn layout_rng(seed: u64, layout: Layout) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layout.index() as u64);
    rng
}

/// `n` logged transitions for `layout`. States are uniform over all 18,
/// actions follow `behavior`, and `behavior_prob` holds the true logging
/// probability.
pub fn generate_dataset(
    user: &SimulatedUser,
    behavior: &BehaviorPolicy,
    n: usize,
    layout: Layout,
) -> Result<Vec<LoggedTransition>, SimError> {
    user.validate()?;
    let probs = behavior.probabilities()?;
    let mut rng = layout_rng(user.seed, layout);
    let states: Vec<State> = State::all().collect();
    Ok((0..n)
        .map(|_| {
            let state = states[rng.random_range(0..states.len())];
            let a = sample_index(&probs, rng.random());
            let action = Action::ALL[a];
            let out = user.respond(state.difficulty, action, &mut rng);
            LoggedTransition {
                layout,
                state,
                action,
                post_mwl: out.post_mwl,
                accuracy: u8::from(out.correct),
                reaction_time_ms: out.reaction_time_ms,
                behavior_prob: Some(probs[a]),
            }
        })
        .collect())
}

/// Policies compared by [`simulate`].
#[derive(Debug, Clone)]
pub enum SimPolicy<'a> {
    Agent(&'a QTable),
    AlwaysNoAdaptation,
    /// Uniform over actions, from its own seeded stream.
    Random,
    /// Picks the first action with maximal expected reward under the user model.
    Oracle,
}

impl SimPolicy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            SimPolicy::Agent(_) => "agent",
            SimPolicy::AlwaysNoAdaptation => "always_no_adaptation",
            SimPolicy::Random => "random",
            SimPolicy::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub policy: String,
    pub episodes: usize,
    pub optimal_mwl_rate: f64,
    pub mean_accuracy: f64,
    pub mean_reaction_time_ms: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub layout: Layout,
    pub seed: u64,
    pub episodes: usize,
    pub policies: Vec<PolicyMetrics>,
}

impl SimReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyMetrics> {
        self.policies.iter().find(|p| p.policy == name)
    }
}

/// Run `n_episodes` single-transition episodes per policy. Episodes chain:
/// the next state's workload is the previous outcome and its strategy the
/// previous action's kind; difficulty is drawn afresh each time. Every
/// policy sees the same random stream for the user.
pub fn simulate(
    user: &SimulatedUser,
    layout: Layout,
    policies: &[SimPolicy<'_>],
    n_episodes: usize,
    weights: &RewardWeights,
) -> Result<SimReport, SimError> {
    user.validate()?;
    let metrics = policies.iter().map(|p| run_policy(user, layout, p, n_episodes, weights)).collect();
    Ok(SimReport { layout, seed: user.seed, episodes: n_episodes, policies: metrics })
}

fn run_policy(user: &SimulatedUser, layout: Layout, policy: &SimPolicy<'_>, n: usize, w: &RewardWeights) -> PolicyMetrics {
    let mut env_rng = layout_rng(user.seed, layout);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(user.seed ^ 0x5eed_0f_a11);
    policy_rng.set_stream(layout.index() as u64);

    let mut state = State { mwl: MwlCategory::Optimal, difficulty: Difficulty::Low, current_strategy: StrategyKind::None };
    let (mut optimal, mut correct, mut rt_sum, mut reward_sum) = (0usize, 0usize, 0.0, 0.0);
    for _ in 0..n {
        state.difficulty = if env_rng.random::<bool>() { Difficulty::High } else { Difficulty::Low };
        let action = match policy {
            SimPolicy::Agent(q) => q.greedy(state),
            SimPolicy::AlwaysNoAdaptation => Action::NoAdaptation,
            SimPolicy::Random => Action::ALL[policy_rng.random_range(0..N_ACTIONS)],
            SimPolicy::Oracle => user.best_actions(state.difficulty, w).1[0],
        };
        let out = user.respond(state.difficulty, action, &mut env_rng);
        let t = LoggedTransition {
            layout,
            state,
            action,
            post_mwl: out.post_mwl,
            accuracy: u8::from(out.correct),
            reaction_time_ms: out.reaction_time_ms,
            behavior_prob: None,
        };
        reward_sum += crate::rl::reward(&t, w);
        optimal += usize::from(out.post_mwl == MwlCategory::Optimal);
        correct += usize::from(out.correct);
        rt_sum += out.reaction_time_ms;
        state = State { mwl: out.post_mwl, difficulty: state.difficulty, current_strategy: action.kind() };
    }
    let nf = n.max(1) as f64;
    PolicyMetrics {
        policy: policy.name().to_string(),
        episodes: n,
        optimal_mwl_rate: optimal as f64 / nf,
        mean_accuracy: correct as f64 / nf,
        mean_reaction_time_ms: rt_sum / nf,
        mean_reward: reward_sum / nf,
    }
}

/// Simulate every layout's agent against the two baselines.
pub fn simulate_pool(
    user: &SimulatedUser,
    pool: &AgentPool,
    n_episodes: usize,
    weights: &RewardWeights,
) -> Result<Vec<SimReport>, SimError> {
    Layout::ALL
        .into_iter()
        .map(|layout| {
            let policies = [SimPolicy::Agent(pool.table(layout)), SimPolicy::AlwaysNoAdaptation, SimPolicy::Random];
            simulate(user, layout, &policies, n_episodes, weights)
        })
        .collect()
}
