//! EEG epoch sources.
//!
//! Everything downstream works on [`EegEpoch`]: a fixed two-second window of
//! raw samples for the three electrodes the feature stage reads. Epochs come
//! either from the seeded [`synthetic`] generator or from a recorded CSV file
//! ([`replay`]); both sit behind the [`EpochSource`] trait so the live loop
//! does not care which one is attached.

pub mod replay;
pub mod stream;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use replay::{read_replay, write_replay_csv, ReplaySource};
pub use stream::{publish_epochs, publish_epochs_with, Pacing, RetryPolicy};
pub use synthetic::{generate_epoch, BandAmplitudes, ChannelAmplitudes, Drift, SyntheticSource, SyntheticSpec};

/// Length of one processing window.
pub const EPOCH_SECONDS: u32 = 2;

/// Default acquisition rate. 512 samples per epoch, 0.5 Hz FFT bins.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 256;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid epoch: {0}")]
    InvalidEpoch(String),
    #[error("gateway unreachable after {attempts} attempts: {last_error}")]
    GatewayUnreachable { attempts: u32, last_error: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Electrode label. Case-sensitive: `Fz`, `C3`, `P3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    Fz,
    C3,
    P3,
}

impl ChannelId {
    pub const ALL: [ChannelId; 3] = [ChannelId::Fz, ChannelId::C3, ChannelId::P3];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelId::Fz => "Fz",
            ChannelId::C3 => "C3",
            ChannelId::P3 => "P3",
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Fz" => Ok(ChannelId::Fz),
            "C3" => Ok(ChannelId::C3),
            "P3" => Ok(ChannelId::P3),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

/// Raw amplitudes in microvolts, one vector per electrode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSamples {
    #[serde(rename = "Fz")]
    pub fz: Vec<f64>,
    #[serde(rename = "C3")]
    pub c3: Vec<f64>,
    #[serde(rename = "P3")]
    pub p3: Vec<f64>,
}

impl ChannelSamples {
    pub fn zeros(len: usize) -> Self {
        Self { fz: vec![0.0; len], c3: vec![0.0; len], p3: vec![0.0; len] }
    }

    pub fn get(&self, channel: ChannelId) -> &[f64] {
        match channel {
            ChannelId::Fz => &self.fz,
            ChannelId::C3 => &self.c3,
            ChannelId::P3 => &self.p3,
        }
    }

    pub fn get_mut(&mut self, channel: ChannelId) -> &mut Vec<f64> {
        match channel {
            ChannelId::Fz => &mut self.fz,
            ChannelId::C3 => &mut self.c3,
            ChannelId::P3 => &mut self.p3,
        }
    }
}

/// One two-second window of multi-channel EEG.
///
/// Construction goes through [`EegEpoch::new`] (and deserialization through
/// the same check), so a value of this type always has exactly
/// `2 * sample_rate_hz` finite samples on every channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EpochWire")]
pub struct EegEpoch {
    pub session_id: String,
    pub epoch_index: u64,
    pub t_start_ms: u64,
    pub sample_rate_hz: u32,
    pub samples: ChannelSamples,
}

#[derive(Deserialize)]
struct EpochWire {
    session_id: String,
    epoch_index: u64,
    t_start_ms: u64,
    sample_rate_hz: u32,
    samples: ChannelSamples,
}

impl TryFrom<EpochWire> for EegEpoch {
    type Error = IngestError;

    fn try_from(w: EpochWire) -> Result<Self, Self::Error> {
        EegEpoch::new(w.session_id, w.epoch_index, w.t_start_ms, w.sample_rate_hz, w.samples)
    }
}

impl EegEpoch {
    pub fn new(
        session_id: impl Into<String>,
        epoch_index: u64,
        t_start_ms: u64,
        sample_rate_hz: u32,
        samples: ChannelSamples,
    ) -> Result<Self, IngestError> {
        if sample_rate_hz == 0 {
            return Err(IngestError::InvalidEpoch("sample_rate_hz must be positive".into()));
        }
        let expected = samples_per_epoch(sample_rate_hz);
        for ch in ChannelId::ALL {
            let data = samples.get(ch);
            if data.len() != expected {
                return Err(IngestError::InvalidEpoch(format!(
                    "channel {ch} has {} samples, expected {expected}",
                    data.len()
                )));
            }
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(IngestError::InvalidEpoch(format!("channel {ch} sample {i} is not finite")));
            }
        }
        Ok(Self { session_id: session_id.into(), epoch_index, t_start_ms, sample_rate_hz, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.fz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, channel: ChannelId) -> &[f64] {
        self.samples.get(channel)
    }

    /// Copy of this epoch with every channel replaced by `f(channel, data)`.
    /// Used by the filter stage; the output keeps the epoch's identity.
    pub(crate) fn map_channels(&self, mut f: impl FnMut(ChannelId, &[f64]) -> Vec<f64>) -> EegEpoch {
        let mut samples = ChannelSamples::zeros(0);
        for ch in ChannelId::ALL {
            *samples.get_mut(ch) = f(ch, self.channel(ch));
        }
        EegEpoch { samples, session_id: self.session_id.clone(), ..*self }
    }
}

pub fn samples_per_epoch(sample_rate_hz: u32) -> usize {
    (sample_rate_hz * EPOCH_SECONDS) as usize
}

/// Anything that yields a session's epochs in order.
pub trait EpochSource: Send {
    fn next_epoch(&mut self) -> Option<Result<EegEpoch, IngestError>>;
}

impl<I> EpochSource for I
where
    I: Iterator<Item = Result<EegEpoch, IngestError>> + Send,
{
    fn next_epoch(&mut self) -> Option<Result<EegEpoch, IngestError>> {
        self.next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_rejects_wrong_length() {
        let mut s = ChannelSamples::zeros(512);
        s.c3.pop();
        let err = EegEpoch::new("s", 0, 0, 256, s).unwrap_err();
        assert!(err.to_string().contains("C3"), "{err}");
    }

    #[test]
    fn epoch_rejects_non_finite() {
        let mut s = ChannelSamples::zeros(512);
        s.p3[10] = f64::NAN;
        assert!(EegEpoch::new("s", 0, 0, 256, s).is_err());
    }

    #[test]
    fn epoch_deserialization_is_validated() {
        let json = serde_json::json!({
            "session_id": "s", "epoch_index": 0, "t_start_ms": 0, "sample_rate_hz": 2,
            "samples": {"Fz": [0.0, 0.0, 0.0, 0.0], "C3": [0.0, 0.0, 0.0, 0.0], "P3": [0.0]}
        });
        assert!(serde_json::from_value::<EegEpoch>(json).is_err());
    }

    #[test]
    fn channel_names_are_case_sensitive() {
        assert_eq!("Fz".parse::<ChannelId>().unwrap(), ChannelId::Fz);
        assert!("fz".parse::<ChannelId>().is_err());
    }
}
