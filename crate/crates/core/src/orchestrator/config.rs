//! One TOML file configures every stage. All sections are optional.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::sim::SimulatedUser;
use crate::domain::{Difficulty, Layout};
use crate::dsp::{Band, DspConfig, PerBand};
use crate::gateway::BrokerConfig;
use crate::ingest::{ChannelAmplitudes, Drift, Pacing, RetryPolicy, SyntheticSpec, DEFAULT_SAMPLE_RATE_HZ};
use crate::mwl::{IndexCuts, MwlWeights};
use crate::rl::TrainingConfig;

/// Environment variable consulted when `--config` is not given.
pub const CONFIG_ENV: &str = "NEUROLOOP_CONFIG";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub session: SessionConfig,
    pub synthetic: SyntheticConfig,
    pub dsp: DspConfig,
    pub mwl: MwlConfig,
    pub training: TrainingConfig,
    pub gateway: GatewayConfig,
    pub simulator: SimulatedUser,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading config {}: {e}", path.display()))?;
        Config::from_toml(&text).map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))
    }

    /// `path`, else `$NEUROLOOP_CONFIG`, else defaults.
    pub fn resolve(path: Option<&Path>) -> anyhow::Result<Self> {
        match path.map(PathBuf::from).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
            Some(p) => Config::load(p),
            None => Ok(Config::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub difficulty: Difficulty,
    /// How many epochs the question stays on screen.
    #[serde(default = "default_question_epochs")]
    pub epochs: u64,
}

fn default_question_epochs() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceConfig {
    Synthetic,
    Replay { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacingConfig {
    Realtime,
    Unpaced,
    FixedMs(u64),
}

impl From<PacingConfig> for Pacing {
    fn from(p: PacingConfig) -> Self {
        match p {
            PacingConfig::Realtime => Pacing::Realtime,
            PacingConfig::Unpaced => Pacing::Unpaced,
            PacingConfig::FixedMs(ms) => Pacing::Fixed(Duration::from_millis(ms)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelPaths {
    pub graph: PathBuf,
    pub timeline: PathBuf,
    pub distribution: PathBuf,
}

impl Default for ModelPaths {
    fn default() -> Self {
        Self {
            graph: "models/graph.json".into(),
            timeline: "models/timeline.json".into(),
            distribution: "models/distribution.json".into(),
        }
    }
}

impl ModelPaths {
    pub fn get(&self, layout: Layout) -> &Path {
        match layout {
            Layout::Graph => &self.graph,
            Layout::Timeline => &self.timeline,
            Layout::Distribution => &self.distribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub session_id: String,
    /// Layout on screen before the first `layout_switch`.
    pub layout: Layout,
    /// Difficulty assumed before the first question.
    pub default_difficulty: Difficulty,
    pub source: SourceConfig,
    pub pacing: PacingConfig,
    pub questions: Vec<Question>,
    pub models: ModelPaths,
    /// Custom catalogue file; the bundled one when absent.
    pub catalogue: Option<PathBuf>,
    pub sessions_dir: PathBuf,
    pub drain_timeout_ms: u64,
    pub retry: RetryPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            session_id: "session".into(),
            layout: Layout::Graph,
            default_difficulty: Difficulty::Low,
            source: SourceConfig::Synthetic,
            pacing: PacingConfig::Realtime,
            questions: (1..=6)
                .map(|i| Question {
                    question_id: format!("q{i}"),
                    difficulty: if i % 2 == 0 { Difficulty::High } else { Difficulty::Low },
                    epochs: default_question_epochs(),
                })
                .collect(),
            models: ModelPaths::default(),
            catalogue: None,
            sessions_dir: "sessions".into(),
            drain_timeout_ms: 2000,
            retry: RetryPolicy::default(),
        }
    }
}

impl SessionConfig {
    pub fn total_epochs(&self) -> u64 {
        self.questions.iter().map(|q| q.epochs).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub sample_rate_hz: u32,
    pub spec: SyntheticSpec,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ, spec: demo_spec() }
    }
}

/// Plausible resting amplitudes on each channel with a slow drift, so a
/// demo session visits all three workload categories.
pub fn demo_spec() -> SyntheticSpec {
    let mut amplitudes = ChannelAmplitudes::default();
    amplitudes.fz = PerBand::from_fn(|b| match b {
        Band::Delta => 20.0,
        Band::Theta => 10.0,
        Band::Alpha => 4.0,
        Band::Beta => 2.0,
    });
    amplitudes.p3 = PerBand::from_fn(|b| if b == Band::Alpha { 15.0 } else { 3.0 });
    amplitudes.c3 = PerBand::from_fn(|b| if b == Band::Beta { 6.0 } else { 3.0 });
    SyntheticSpec { amplitudes, noise_uv: 4.0, seed: 7, drift: Some(Drift { period_epochs: 24.0, depth: 0.6 }) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MwlConfig {
    pub calibration: PathBuf,
    pub weights: MwlWeights,
    pub cuts: IndexCuts,
}

impl Default for MwlConfig {
    fn default() -> Self {
        Self { calibration: "calibration.json".into(), weights: MwlWeights::default(), cuts: IndexCuts::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    #[serde(flatten)]
    pub broker: BrokerConfig,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: 8080, broker: BrokerConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn partial_sections_override() {
        let cfg = Config::from_toml(
            r#"
            [session]
            session_id = "demo"
            pacing = { fixed_ms = 100 }
            source = { replay = { path = "rec.csv" } }
            questions = [{ question_id = "a", difficulty = "high" }]

            [gateway]
            port = 0
            retention = 16

            [training]
            target = "coupled"
            step = "constant"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.session.session_id, "demo");
        assert_eq!(Pacing::from(cfg.session.pacing), Pacing::Fixed(Duration::from_millis(100)));
        assert_eq!(cfg.session.source, SourceConfig::Replay { path: "rec.csv".into() });
        assert_eq!(cfg.session.total_epochs(), 5);
        assert_eq!(cfg.gateway.broker.retention, 16);
        assert_eq!(cfg.gateway.broker.subscriber_buffer, 4096);
        assert_eq!(cfg.training.target, crate::rl::TargetPolicy::Coupled);
        assert_eq!(cfg.session.drain_timeout_ms, 2000);
    }

    #[test]
    fn default_config_serializes_to_toml() {
        let text = toml::to_string(&Config::default()).unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), Config::default());
    }
}
