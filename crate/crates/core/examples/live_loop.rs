//! Run the whole pipeline on synthetic EEG with a short question script and
//! watch the adaptation configs arrive on the bus.
//!
//! The HTTP surface (`/ws/dashboard`, `/api/state`, `/api/metrics`) is live
//! on the printed address while the script runs.

use std::sync::Arc;

use neuroloop::adapt::{AdaptationConfig, Catalogue};
use neuroloop::gateway::Topic;
use neuroloop::mwl::MwlEstimator;
use neuroloop::orchestrator::config::{PacingConfig, Question};
use neuroloop::orchestrator::session::calibrate_synthetic;
use neuroloop::orchestrator::{generate_dataset, start_loop, BehaviorPolicy, Config, LoopInputs, SimulatedUser};
use neuroloop::rl::{train, AgentPool, TrainingConfig};
use neuroloop::{Difficulty, Layout};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile_dir()?;
    let mut cfg = Config::default();
    cfg.gateway.port = 0;
    cfg.session.pacing = PacingConfig::FixedMs(200);
    cfg.session.sessions_dir = dir.clone();
    cfg.session.questions = vec![
        Question { question_id: "q1".into(), difficulty: Difficulty::High, epochs: 4 },
        Question { question_id: "q2".into(), difficulty: Difficulty::Low, epochs: 4 },
    ];

    let user = SimulatedUser::default();
    let tables = Layout::ALL
        .into_iter()
        .map(|l| Ok(train(&generate_dataset(&user, &BehaviorPolicy::Uniform, 3_000, l)?, l, &TrainingConfig::default())?.table))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let thresholds = calibrate_synthetic(&cfg, 120)?;
    let inputs = LoopInputs {
        estimator: MwlEstimator::new(thresholds, cfg.mwl.weights, cfg.mwl.cuts)?,
        pool: AgentPool::new(tables)?,
        catalogue: Arc::new(Catalogue::builtin()),
    };

    let running = start_loop(&cfg, inputs).await?;
    println!("listening on http://{}", running.addr);
    let mut configs = running.broker.subscribe(Topic::AdaptationConfig, Some(1))?;
    let printer = tokio::spawn(async move {
        while let Some(env) = configs.recv().await {
            let c: AdaptationConfig = env.decode().unwrap();
            println!("epoch {:?} -> {} {:?}", c.trigger_epoch, c.layout, c.strategy);
        }
    });
    let report = running.wait().await?;
    printer.await?;
    println!("p99 epoch->config latency {:?} ms, log {}", report.latency.p99_ms, report.log_path.display());
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("neuroloop-live-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
