//! Argument types and handlers for the `neuroloop` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{Config, SyntheticConfig};
use super::session::{calibrate_synthetic, read_session_log, replay_session, run_loop, LoopInputs};
use super::sim::{generate_dataset, simulate_pool, BehaviorPolicy};
use crate::adapt::{validate_catalogue, AdaptationEngine, Catalogue, StateStore, Vocabulary};
use crate::domain::{Action, Layout};
use crate::dsp::FeatureExtractor;
use crate::gateway::{router, serve_http, Broker};
use crate::ingest::{read_replay, write_replay_csv, Pacing, SyntheticSource};
use crate::mwl::{calibrate_features, MwlError};
use crate::rl::{evaluate, read_dataset, train, write_dataset, AgentPool, QTable, StepSchedule, TargetPolicy};

#[derive(Debug, Parser)]
#[command(name = "neuroloop", version, about = "EEG-driven adaptive dashboard loop")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = super::config::CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute band-power quartiles and write the calibration file.
    Calibrate(CalibrateArgs),
    /// Train one layout's Q-table from a JSONL transition log.
    Train(TrainArgs),
    /// Off-policy evaluation of a model's greedy policy on a log.
    Eval(EvalArgs),
    /// Run the live loop until the question script ends.
    Run(RunArgs),
    /// Closed-loop comparison of trained agents against baselines.
    Simulate(SimulateArgs),
    /// Replay an EEG recording through feature extraction, or a session log
    /// through the gateway.
    Replay(ReplayArgs),
    /// Write synthetic EEG in the replay CSV format.
    Synth(SynthArgs),
    /// Generate logged transitions from the simulated user.
    GenData(GenDataArgs),
    /// Check an adaptation catalogue against the vocabulary.
    CatalogueValidate(CatalogueArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// JSONL of feature vectors.
    #[arg(long, conflicts_with = "synthetic_epochs")]
    pub features: Option<PathBuf>,
    /// Calibrate from this many epochs of the configured synthetic source.
    #[arg(long)]
    pub synthetic_epochs: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    FrozenUniform,
    Coupled,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StepArg {
    VisitAverage,
    Constant,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub layout: Layout,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    #[arg(long, value_enum)]
    pub step: Option<StepArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub session_id: Option<String>,
    /// Emit epochs as fast as possible instead of every 2 s.
    #[arg(long)]
    pub unpaced: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model files, one per layout. Defaults to the configured model paths.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "input")]
pub struct ReplayInput {
    /// EEG recording in the replay CSV format.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Session log written by `run`.
    #[arg(long)]
    pub session: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub input: ReplayInput,
    /// Pace at one epoch per 2 s (recording) or the recorded gaps (session).
    #[arg(long)]
    pub realtime: bool,
    /// Session replay speed-up factor.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML with `sample_rate_hz` and a `[spec]` table. Defaults to the
    /// `[synthetic]` section of the config.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub epochs: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub layout: Layout,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `uniform` or seven comma-separated weights in action order.
    #[arg(long, default_value = "uniform")]
    pub behavior: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CatalogueArgs {
    #[arg(long)]
    pub catalogue: Option<PathBuf>,
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn parse_behavior(s: &str) -> anyhow::Result<BehaviorPolicy> {
    if s.eq_ignore_ascii_case("uniform") {
        return Ok(BehaviorPolicy::Uniform);
    }
    let w: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    let w: [f64; 7] = w.try_into().map_err(|v: Vec<f64>| anyhow::anyhow!("expected 7 weights, got {}", v.len()))?;
    Ok(BehaviorPolicy::Weights(w))
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

pub fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut cfg = Config::resolve(cli.config.as_deref())?;
    match cli.command {
        Command::Calibrate(a) => {
            let thresholds = match (a.features, a.synthetic_epochs) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let features = text
                        .lines()
                        .enumerate()
                        .filter(|(_, l)| !l.trim().is_empty())
                        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("line {}", i + 1)))
                        .collect::<anyhow::Result<Vec<_>>>()?;
                    calibrate_features(&features)?
                }
                (None, Some(n)) => calibrate_synthetic(&cfg, n)?,
                (None, None) => bail!("pass --features <jsonl> or --synthetic-epochs <n>"),
            };
            thresholds.save(&a.out)?;
            eprintln!("wrote {} (n = {})", a.out.display(), thresholds.n);
        }
        Command::Train(a) => {
            let mut tc = cfg.training;
            if let Some(t) = a.target {
                tc.target = match t {
                    TargetArg::FrozenUniform => TargetPolicy::FrozenUniform,
                    TargetArg::Coupled => TargetPolicy::Coupled,
                };
            }
            if let Some(s) = a.step {
                tc.step = match s {
                    StepArg::VisitAverage => StepSchedule::VisitAverage,
                    StepArg::Constant => StepSchedule::Constant,
                };
            }
            let data: Vec<_> = read_dataset(&a.data)?.into_iter().filter(|t| t.layout == a.layout).collect();
            let outcome = train(&data, a.layout, &tc)?;
            outcome.table.save(&a.out)?;
            eprintln!(
                "{}: {} records, {} sweeps, max |dQ| {:.3e}, converged {}",
                a.layout,
                data.len(),
                outcome.sweeps,
                outcome.last_delta,
                outcome.converged
            );
        }
        Command::Eval(a) => {
            let table = QTable::load(&a.model)?;
            let report = evaluate(&table, &read_dataset(&a.data)?, &cfg.training.reward)?;
            write_json(None, &report)?;
        }
        Command::Run(a) => {
            if let Some(p) = a.port {
                cfg.gateway.port = p;
            }
            if let Some(s) = a.session_id {
                cfg.session.session_id = s;
            }
            if a.unpaced {
                cfg.session.pacing = super::config::PacingConfig::Unpaced;
            }
            let inputs = match LoopInputs::load(&cfg) {
                Ok(i) => i,
                Err(e) if e.module == "mwl-estimator" && !cfg.mwl.calibration.exists() => {
                    return Err(MwlError::MissingCalibration { path: cfg.mwl.calibration.display().to_string() }.into())
                }
                Err(e) => return Err(e.into()),
            };
            let report = runtime()?.block_on(run_loop(&cfg, inputs))?;
            write_json(None, &report)?;
        }
        Command::Simulate(a) => {
            let paths: Vec<PathBuf> = if a.models.is_empty() {
                Layout::ALL.iter().map(|&l| cfg.session.models.get(l).to_path_buf()).collect()
            } else {
                a.models
            };
            let pool = AgentPool::load(&paths)?;
            let mut user = cfg.simulator.clone();
            if let Some(seed) = a.seed {
                user.seed = seed;
            }
            let reports = simulate_pool(&user, &pool, a.episodes, &cfg.training.reward)?;
            write_json(a.out.as_deref(), &reports)?;
        }
        Command::Replay(a) => {
            if let Some(file) = a.input.file {
                let src = read_replay(&file)?;
                let extractor = FeatureExtractor::new(cfg.dsp.clone(), src.sample_rate_hz)?;
                let pacing = if a.realtime { Pacing::Realtime } else { Pacing::Unpaced };
                let mut out = output(None)?;
                let rt = runtime()?;
                let mut ticker = pacing.interval().map(|d| rt.block_on(async { tokio::time::interval(d) }));
                for epoch in src {
                    if let Some(t) = ticker.as_mut() {
                        rt.block_on(t.tick());
                    }
                    serde_json::to_writer(&mut out, &extractor.extract(&epoch?)?)?;
                    writeln!(out)?;
                    out.flush()?;
                }
            } else if let Some(path) = a.input.session {
                let envelopes = read_session_log(&path)?;
                let port = a.port.unwrap_or(cfg.gateway.port);
                // without --realtime the recorded gaps are skipped entirely
                let speed = if a.realtime { a.speed } else { f64::INFINITY };
                let host = cfg.gateway.host.clone();
                let broker_cfg = cfg.gateway.broker.clone();
                let n = runtime()?.block_on(async move {
                    let broker = Broker::new(broker_cfg);
                    let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                    eprintln!("replaying on ws://{}/ws/dashboard", listener.local_addr()?);
                    let http = tokio::spawn(serve_http(listener, router(broker.clone(), StateStore::new()), async {}));
                    let n = replay_session(&envelopes, &broker, speed).await?;
                    broker.close();
                    http.abort();
                    anyhow::Ok(n)
                })?;
                eprintln!("replayed {n} envelopes");
            }
        }
        Command::Synth(a) => {
            let synth: SyntheticConfig = match &a.spec {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("spec {}", p.display()))?,
                None => cfg.synthetic.clone(),
            };
            let epochs = SyntheticSource::new(synth.spec, synth.sample_rate_hz, "synthetic")?
                .take_epochs(a.epochs)
                .collect::<Result<Vec<_>, _>>()?;
            let mut out = output(a.out.as_deref())?;
            write_replay_csv(&mut out, &epochs)?;
            out.flush()?;
        }
        Command::GenData(a) => {
            let mut user = cfg.simulator.clone();
            if let Some(seed) = a.seed {
                user.seed = seed;
            }
            let data = generate_dataset(&user, &parse_behavior(&a.behavior)?, a.n, a.layout)?;
            let mut out = output(a.out.as_deref())?;
            write_dataset(&mut out, &data)?;
            out.flush()?;
        }
        Command::CatalogueValidate(a) => {
            let vocab = match &a.vocabulary {
                Some(p) => Vocabulary::from_json(&std::fs::read_to_string(p)?)?,
                None => Vocabulary::builtin(),
            };
            let text = match &a.catalogue {
                Some(p) => std::fs::read_to_string(p)?,
                None => Catalogue::builtin_json().to_string(),
            };
            let entries = Catalogue::parse_entries(&text)?;
            let violations = validate_catalogue(&entries, &vocab);
            if violations.is_empty() {
                println!("ok: {} entries", entries.len());
            } else {
                for v in &violations {
                    println!("{v}");
                }
                return Ok(ExitCode::FAILURE);
            }
            let mut engine = AdaptationEngine::new(Arc::new(Catalogue::new(entries, &vocab)?));
            let mut resolved = 0;
            for layout in Layout::ALL {
                for action in Action::ALL {
                    engine.resolve("validate", layout, action, None);
                    resolved += 1;
                }
            }
            println!("ok: resolve succeeds for all {resolved} (layout, action) pairs");
        }
    }
    Ok(ExitCode::SUCCESS)
}
