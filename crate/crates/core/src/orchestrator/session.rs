//! The live loop: every stage as a task on one broker, plus session logs
//! and their replay.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use serde::Serialize;
use thiserror::Error;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::config::{Config, SourceConfig};
use crate::adapt::{engine_task, AdaptationEngine, Catalogue, StateStore, Vocabulary};
use crate::dsp::FeatureExtractor;
use crate::gateway::{router, serve_http, BehaviorEvent, BehaviorKind, Broker, Envelope, GatewayError, LatencySummary, Topic};
use crate::ingest::{publish_epochs_with, read_replay, EegEpoch, IngestError, SyntheticSource};
use crate::mwl::{calibrate_features, MwlEstimator, QuantileThresholds};
use crate::rl::serve::{LabelledDifficulty, StateAssembler};
use crate::rl::{serve, AgentPool};

/// A stage failed to start. `module` names the stage.
#[derive(Debug, Error)]
#[error("{module}: {message}")]
pub struct StartupError {
    pub module: &'static str,
    pub message: String,
}

fn startup(module: &'static str) -> impl Fn(&dyn std::fmt::Display) -> StartupError {
    move |e| StartupError { module, message: e.to_string() }
}

/// Everything the loop needs from disk, loaded up front.
#[derive(Debug, Clone)]
pub struct LoopInputs {
    pub estimator: MwlEstimator,
    pub pool: AgentPool,
    pub catalogue: Arc<Catalogue>,
}

impl LoopInputs {
    pub fn load(cfg: &Config) -> Result<Self, StartupError> {
        let thresholds = QuantileThresholds::load(&cfg.mwl.calibration).map_err(|e| startup("mwl-estimator")(&e))?;
        let estimator =
            MwlEstimator::new(thresholds, cfg.mwl.weights, cfg.mwl.cuts).map_err(|e| startup("mwl-estimator")(&e))?;
        let m = &cfg.session.models;
        let pool = AgentPool::load(crate::domain::Layout::ALL.map(|l| m.get(l).to_path_buf()))
            .map_err(|e| startup("rl-agent")(&e))?;
        let catalogue = match &cfg.session.catalogue {
            Some(path) => Catalogue::load(path, &Vocabulary::builtin()).map_err(|e| startup("adaptation-engine")(&e))?,
            None => Catalogue::builtin(),
        };
        Ok(Self { estimator, pool, catalogue: Arc::new(catalogue) })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub session_id: String,
    pub epochs_published: u64,
    pub configs_published: u64,
    pub envelopes_logged: u64,
    pub drained: bool,
    pub latency: LatencySummary,
    pub log_path: PathBuf,
}

/// A loop that has started. The HTTP surface is live at `addr` until the
/// question script finishes.
pub struct RunningLoop {
    pub addr: SocketAddr,
    pub broker: Broker,
    pub store: StateStore,
    driver: JoinHandle<anyhow::Result<RunReport>>,
}

impl RunningLoop {
    pub async fn wait(self) -> anyhow::Result<RunReport> {
        self.driver.await?
    }
}

type BoxedSource = Box<dyn Iterator<Item = Result<EegEpoch, IngestError>> + Send>;

fn open_source(cfg: &Config) -> Result<(BoxedSource, u32), StartupError> {
    let total = cfg.session.total_epochs() as usize;
    match &cfg.session.source {
        SourceConfig::Synthetic => {
            let fs = cfg.synthetic.sample_rate_hz;
            let src = SyntheticSource::new(cfg.synthetic.spec.clone(), fs, cfg.session.session_id.clone())
                .map_err(|e| startup("signal-ingestion")(&e))?
                .take_epochs(total as u64);
            Ok((Box::new(src), fs))
        }
        SourceConfig::Replay { path } => {
            let src = read_replay(path).map_err(|e| startup("signal-ingestion")(&e))?;
            let fs = src.sample_rate_hz;
            let session = cfg.session.session_id.clone();
            let src = src.take(total).map(move |e| {
                e.map(|mut e| {
                    e.session_id = session.clone();
                    e
                })
            });
            Ok((Box::new(src), fs))
        }
    }
}

/// Start every stage and return once the HTTP listener is bound.
pub async fn start_loop(cfg: &Config, inputs: LoopInputs) -> Result<RunningLoop, StartupError> {
    let session_id = cfg.session.session_id.clone();
    if cfg.session.questions.is_empty() {
        return Err(StartupError { module: "orchestrator", message: "question script is empty".into() });
    }
    let (source, fs) = open_source(cfg)?;
    let extractor = FeatureExtractor::new(cfg.dsp.clone(), fs).map_err(|e| startup("dsp-features")(&e))?;

    let broker = Broker::new(cfg.gateway.broker.clone());
    let store = StateStore::new();
    store.begin_session(&session_id, cfg.session.layout);

    std::fs::create_dir_all(&cfg.session.sessions_dir).map_err(|e| startup("orchestrator")(&e))?;
    let log_path = cfg.session.sessions_dir.join(format!("{session_id}.jsonl"));
    let log_file = File::create(&log_path).map_err(|e| startup("orchestrator")(&e))?;

    let gw = startup("gateway");
    let log_subs = Topic::ALL
        .into_iter()
        .map(|t| broker.subscribe(t, None).map(|s| s.into_stream().boxed()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| gw(&e))?;
    let mut tasks: Vec<JoinHandle<()>> = Vec::new();

    let logger = tokio::spawn(async move {
        let mut all = futures::stream::select_all(log_subs);
        let mut out = BufWriter::new(log_file);
        let mut n = 0u64;
        while let Some(env) = all.next().await {
            let line = serde_json::to_writer(&mut out, &*env).map_err(std::io::Error::from);
            if line.and_then(|_| out.write_all(b"\n")).is_err() {
                tracing::error!("session log write failed");
                break;
            }
            n += 1;
        }
        let _ = out.flush();
        n
    });

    let mut epochs = broker.subscribe(Topic::EegEpoch, None).map_err(|e| gw(&e))?;
    let b = broker.clone();
    tasks.push(tokio::spawn(async move {
        while let Some(env) = epochs.recv().await {
            let fv = env
                .decode::<EegEpoch>()
                .map_err(|e| e.to_string())
                .and_then(|epoch| extractor.extract(&epoch).map_err(|e| e.to_string()));
            match fv {
                Ok(fv) => {
                    if let Err(GatewayError::Closed) = b.publish(Topic::BandPower, &fv) {
                        break;
                    }
                }
                Err(e) => tracing::warn!(error = %e, seq = env.seq, "feature extraction failed"),
            }
        }
    }));

    let mut features = broker.subscribe(Topic::BandPower, None).map_err(|e| gw(&e))?;
    let b = broker.clone();
    let estimator = inputs.estimator;
    tasks.push(tokio::spawn(async move {
        while let Some(env) = features.recv().await {
            match env.decode() {
                Ok(fv) => {
                    if let Err(GatewayError::Closed) = b.publish(Topic::MwlEstimate, &estimator.estimate(&fv)) {
                        break;
                    }
                }
                Err(e) => tracing::warn!(error = %e, "malformed feature vector"),
            }
        }
    }));

    let assembler = StateAssembler::new(cfg.session.layout, cfg.session.default_difficulty, Box::new(LabelledDifficulty));
    tasks.push(tokio::spawn(serve(&broker, inputs.pool, assembler).map_err(|e| startup("rl-agent")(&e))?));
    let engine = AdaptationEngine::new(inputs.catalogue);
    tasks.push(tokio::spawn(engine_task(&broker, engine, store.clone()).map_err(|e| startup("adaptation-engine")(&e))?));

    let listener = tokio::net::TcpListener::bind((cfg.gateway.host.as_str(), cfg.gateway.port))
        .await
        .map_err(|e| gw(&e))?;
    let addr = listener.local_addr().map_err(|e| gw(&e))?;
    let (stop_http, http_stopped) = oneshot::channel::<()>();
    let http = tokio::spawn(serve_http(listener, router(broker.clone(), store.clone()), async {
        let _ = http_stopped.await;
    }));
    tracing::info!(%addr, session = %session_id, "loop started");

    let driver = {
        let broker = broker.clone();
        let store = store.clone();
        let session = cfg.session.clone();
        tokio::spawn(async move {
            // question script: announce each question just before its first epoch
            let mut starts = Vec::new();
            let mut at = 0;
            for q in &session.questions {
                starts.push((at, q.clone()));
                at += q.epochs;
            }
            let b = broker.clone();
            let sid = session.session_id.clone();
            let announce = move |epoch: &EegEpoch| {
                if let Some((_, q)) = starts.iter().find(|(s, _)| *s == epoch.epoch_index) {
                    let ev = BehaviorEvent::new(
                        sid.clone(),
                        BehaviorKind::QuestionShown {
                            question_id: q.question_id.clone(),
                            difficulty: Some(q.difficulty),
                            layout: None,
                        },
                    );
                    b.publish(Topic::BehaviorEvents, &ev).map_err(|e| IngestError::InvalidEpoch(e.to_string()))?;
                }
                Ok(())
            };
            let ingest = publish_epochs_with(IterSource(source), &broker, session.pacing.into(), session.retry, announce).await;

            // ordered shutdown: ingestion is done, let the pipeline drain
            let sent = *ingest.as_ref().unwrap_or(&0);
            let drained = tokio::time::timeout(Duration::from_millis(session.drain_timeout_ms), async {
                while broker.metrics().topic(Topic::AdaptationConfig).published < sent {
                    tokio::time::sleep(Duration::from_millis(5)).await;
                }
            })
            .await
            .is_ok();
            store.end_session();
            let metrics = broker.metrics();
            broker.close();
            for t in tasks {
                let _ = tokio::time::timeout(Duration::from_secs(5), t).await;
            }
            let envelopes_logged = logger.await.unwrap_or(0);
            let _ = stop_http.send(());
            let _ = tokio::time::timeout(Duration::from_secs(5), http).await;

            let epochs_published = ingest.map_err(|e| anyhow::anyhow!("signal-ingestion: {e}"))?;
            Ok(RunReport {
                session_id: session.session_id.clone(),
                epochs_published,
                configs_published: metrics.topic(Topic::AdaptationConfig).published,
                envelopes_logged,
                drained,
                latency: metrics.latency,
                log_path,
            })
        })
    };

    Ok(RunningLoop { addr, broker, store, driver })
}

struct IterSource(BoxedSource);

impl crate::ingest::EpochSource for IterSource {
    fn next_epoch(&mut self) -> Option<Result<EegEpoch, IngestError>> {
        self.0.next()
    }
}

/// Run the question script to completion.
pub async fn run_loop(cfg: &Config, inputs: LoopInputs) -> anyhow::Result<RunReport> {
    Ok(start_loop(cfg, inputs).await?.wait().await?)
}

pub fn read_session_log(path: impl AsRef<Path>) -> anyhow::Result<Vec<Envelope>> {
    let file = File::open(path.as_ref())?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| Ok(serde_json::from_str(&l?).map_err(|e| anyhow::anyhow!("line {}: {e}", i + 1))?))
        .collect()
}

/// Re-publish recorded envelopes on `broker`, keeping the recorded gaps
/// between them divided by `speed`. Returns the number published.
pub async fn replay_session(envelopes: &[Envelope], broker: &Broker, speed: f64) -> Result<usize, GatewayError> {
    let speed = if speed > 0.0 { speed } else { 1.0 };
    let mut prev: Option<u64> = None;
    for env in envelopes {
        if let Some(p) = prev {
            let gap = env.timestamp_ms.saturating_sub(p) as f64 / speed;
            if gap >= 1.0 {
                tokio::time::sleep(Duration::from_millis(gap as u64)).await;
            }
        }
        prev = Some(env.timestamp_ms);
        broker.publish_value(env.topic, env.payload.clone())?;
    }
    Ok(envelopes.len())
}

/// Calibrate thresholds from `n` epochs of the configured synthetic source.
pub fn calibrate_synthetic(cfg: &Config, n: u64) -> anyhow::Result<QuantileThresholds> {
    let fs = cfg.synthetic.sample_rate_hz;
    let extractor = FeatureExtractor::new(cfg.dsp.clone(), fs)?;
    let features = SyntheticSource::new(cfg.synthetic.spec.clone(), fs, "calibration")?
        .take_epochs(n)
        .map(|e| Ok(extractor.extract(&e?)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(calibrate_features(&features)?)
}
