#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use neuroloop::ingest::{ChannelId, ChannelSamples, EegEpoch};
use neuroloop::rl::{reward, LoggedTransition, RewardWeights, N_ACTIONS, N_STATES};

pub const FS: u32 = 256;
pub const N: usize = 512;

/// One-sided periodogram by the O(N^2) definition of the DFT.
pub fn naive_psd(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let scale = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            scale * (re * re + im * im) / (fs * n as f64)
        })
        .collect()
}

pub fn tone(freq: f64, amp: f64) -> Vec<f64> {
    (0..N).map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(FS)).sin()).collect()
}

pub fn epoch_with(channel: ChannelId, data: Vec<f64>) -> EegEpoch {
    let mut s = ChannelSamples::zeros(N);
    *s.get_mut(channel) = data;
    EegEpoch::new("test", 0, 0, FS, s).unwrap()
}

pub fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Per-cell mean of `w * r` computed directly from the records, where `w`
/// is the clipped ratio of a uniform target to the logged probability.
pub fn brute_force_cell_means(data: &[LoggedTransition], weights: &RewardWeights, clip: f64) -> HashMap<(usize, usize), f64> {
    let mut sums: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    for t in data {
        let w = ((1.0 / N_ACTIONS as f64) / t.behavior_prob.unwrap()).min(clip);
        let e = sums.entry((t.state.index(), t.action.index())).or_default();
        e.0 += w * reward(t, weights);
        e.1 += 1;
    }
    assert!(sums.keys().all(|&(s, a)| s < N_STATES && a < N_ACTIONS));
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

pub mod fanout {
    use std::thread;

    use neuroloop::gateway::{Broker, BrokerConfig, Topic};
    use serde_json::json;

    /// What each subscriber saw: `(seq, publisher, counter)` per message.
    pub type Trace = Vec<(u64, usize, usize)>;

    /// `publishers` threads each publish `per_publisher` messages on one
    /// topic while `subscribers` threads drain it with blocking receives.
    pub fn run(publishers: usize, subscribers: usize, per_publisher: usize) -> Vec<Trace> {
        let total = publishers * per_publisher;
        let broker = Broker::new(BrokerConfig { subscriber_buffer: total, ..BrokerConfig::default() });
        let readers: Vec<_> = (0..subscribers)
            .map(|_| {
                let mut sub = broker.subscribe(Topic::BehaviorEvents, None).unwrap();
                thread::spawn(move || {
                    let mut trace = Vec::with_capacity(total);
                    while trace.len() < total {
                        let env = sub.blocking_recv().expect("subscription ended early");
                        let id = env.payload["question_id"].as_str().unwrap().to_string();
                        let (p, i) = id.split_once(':').unwrap();
                        trace.push((env.seq, p.parse().unwrap(), i.parse().unwrap()));
                    }
                    assert!(sub.try_recv().is_none(), "extra message delivered");
                    trace
                })
            })
            .collect();
        let writers: Vec<_> = (0..publishers)
            .map(|p| {
                let broker = broker.clone();
                thread::spawn(move || {
                    for i in 0..per_publisher {
                        let payload = json!({
                            "session_id": format!("pub{p}"),
                            "kind": "answer_submitted",
                            "question_id": format!("{p}:{i}"),
                            "correct": true,
                            "reaction_time_ms": 1.0,
                        });
                        broker.publish_value(Topic::BehaviorEvents, payload).unwrap();
                    }
                })
            })
            .collect();
        for w in writers {
            w.join().unwrap();
        }
        let traces = readers.into_iter().map(|r| r.join().unwrap()).collect();
        let m = broker.metrics();
        assert_eq!(m.topic(Topic::BehaviorEvents).published, total as u64);
        assert_eq!(m.topic(Topic::BehaviorEvents).delivered, (total * subscribers) as u64);
        traces
    }

    /// Empty when every subscriber received every message exactly once,
    /// in seq order, identically, and each publisher's messages in the
    /// order they were sent.
    pub fn violations(traces: &[Trace], publishers: usize, per_publisher: usize) -> Vec<String> {
        let total = publishers * per_publisher;
        let mut out = Vec::new();
        for (k, t) in traces.iter().enumerate() {
            if t.len() != total {
                out.push(format!("subscriber {k}: {} of {total} messages", t.len()));
            }
            if let Some(w) = t.windows(2).find(|w| w[1].0 != w[0].0 + 1) {
                out.push(format!("subscriber {k}: seq {} followed by {}", w[0].0, w[1].0));
            }
            let mut next = vec![0usize; publishers];
            for &(_, p, i) in t {
                if i != next[p] {
                    out.push(format!("subscriber {k}: publisher {p} message {i} arrived when {} was due", next[p]));
                    break;
                }
                next[p] += 1;
            }
            if t != &traces[0] {
                out.push(format!("subscriber {k} saw a different order than subscriber 0"));
            }
        }
        out
    }
}

pub mod closed_loop {
    use neuroloop::orchestrator::{generate_dataset, BehaviorPolicy, SimulatedUser};
    use neuroloop::rl::{train, QTable, RewardWeights, State, TrainingConfig};
    use neuroloop::Layout;

    /// Seed fixed before any evaluation run; never tuned.
    pub const SEED: u64 = 2025;

    pub fn default_user() -> SimulatedUser {
        SimulatedUser { seed: SEED, ..SimulatedUser::default() }
    }

    /// One agent per layout, each trained on `n` uniformly logged transitions.
    pub fn train_agents(user: &SimulatedUser, n: usize) -> Vec<QTable> {
        Layout::ALL
            .into_iter()
            .map(|layout| {
                let data = generate_dataset(user, &BehaviorPolicy::Uniform, n, layout).unwrap();
                let out = train(&data, layout, &TrainingConfig::default()).unwrap();
                assert!(out.converged);
                out.table
            })
            .collect()
    }

    /// States whose greedy action attains the user model's maximal
    /// expected reward (ties count as a match).
    pub fn matching_states(user: &SimulatedUser, table: &QTable, w: &RewardWeights) -> Vec<(State, bool)> {
        State::all()
            .map(|s| {
                let (best, _) = user.best_actions(s.difficulty, w);
                let got = user.expected_reward(s.difficulty, table.greedy(s), w);
                (s, (best - got).abs() < 1e-12)
            })
            .collect()
    }
}

pub mod live {
    use std::path::Path;
    use std::sync::Arc;

    use neuroloop::adapt::Catalogue;
    use neuroloop::mwl::MwlEstimator;
    use neuroloop::orchestrator::config::{PacingConfig, Question};
    use neuroloop::orchestrator::session::calibrate_synthetic;
    use neuroloop::orchestrator::{Config, LoopInputs};
    use neuroloop::rl::AgentPool;
    use neuroloop::Difficulty;

    use super::closed_loop::{default_user, train_agents};

    /// A loop config writing into `dir` with an ephemeral port and a short
    /// question script of `questions` x `epochs_each` epochs.
    pub fn config(dir: &Path, pacing: PacingConfig, questions: usize, epochs_each: u64) -> Config {
        let mut cfg = Config::default();
        cfg.gateway.port = 0;
        cfg.session.session_id = "live".into();
        cfg.session.pacing = pacing;
        cfg.session.sessions_dir = dir.join("sessions");
        cfg.session.questions = (0..questions)
            .map(|i| Question {
                question_id: format!("q{}", i + 1),
                difficulty: if i % 2 == 0 { Difficulty::High } else { Difficulty::Low },
                epochs: epochs_each,
            })
            .collect();
        cfg
    }

    /// Calibration, agents and catalogue built in memory.
    pub fn inputs(cfg: &Config) -> LoopInputs {
        let thresholds = calibrate_synthetic(cfg, 120).unwrap();
        LoopInputs {
            estimator: MwlEstimator::new(thresholds, cfg.mwl.weights, cfg.mwl.cuts).unwrap(),
            pool: AgentPool::new(train_agents(&default_user(), 2_000)).unwrap(),
            catalogue: Arc::new(Catalogue::builtin()),
        }
    }
}

pub mod cli {
    use std::path::Path;
    use std::process::{Command, Output};

    use sha2::{Digest, Sha256};

    pub fn neuroloop(dir: &Path, args: &[&str]) -> Output {
        let out = Command::new(env!("CARGO_BIN_EXE_neuroloop"))
            .args(args)
            .current_dir(dir)
            .env_remove("NEUROLOOP_CONFIG")
            .env("RUST_LOG", "warn")
            .output()
            .expect("binary runs");
        out
    }

    pub fn ok(dir: &Path, args: &[&str]) -> String {
        let out = neuroloop(dir, args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    pub fn sha256_file(path: &Path) -> String {
        Sha256::digest(std::fs::read(path).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// gen-data, train and simulate for every layout into `dir`; returns
    /// `(file name, sha256)` for each output.
    pub fn pipeline_hashes(dir: &Path, seed: u64) -> Vec<(String, String)> {
        let seed = seed.to_string();
        let mut files = Vec::new();
        for layout in ["graph", "timeline", "distribution"] {
            let data = format!("{layout}.jsonl");
            let model = format!("{layout}.json");
            ok(dir, &["gen-data", "--layout", layout, "--n", "5000", "--seed", &seed, "--out", &data]);
            ok(dir, &["train", "--data", &data, "--layout", layout, "--out", &model]);
            files.push(data);
            files.push(model);
        }
        ok(dir, &[
            "simulate", "--model", "graph.json", "--model", "timeline.json", "--model", "distribution.json",
            "--episodes", "10000", "--seed", &seed, "--out", "sim.json",
        ]);
        files.push("sim.json".into());
        files.into_iter().map(|f| { let h = sha256_file(&dir.join(&f)); (f, h) }).collect()
    }
}
