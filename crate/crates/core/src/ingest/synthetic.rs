//! Seeded stand-in for an EEG headset.
//!
//! Each channel is a sum of one sinusoid per band plus white Gaussian noise.
//! The noise stream is ChaCha8 keyed by `seed`, with the epoch index as the
//! ChaCha stream id, so any epoch can be regenerated on its own and the
//! output is identical across platforms.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{samples_per_epoch, ChannelId, ChannelSamples, EegEpoch, IngestError, EPOCH_SECONDS};
use crate::dsp::{Band, PerBand};

/// Peak sinusoid amplitude per band, µV.
pub type BandAmplitudes = PerBand<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelAmplitudes {
    #[serde(rename = "Fz", default)]
    pub fz: BandAmplitudes,
    #[serde(rename = "C3", default)]
    pub c3: BandAmplitudes,
    #[serde(rename = "P3", default)]
    pub p3: BandAmplitudes,
}

impl ChannelAmplitudes {
    pub fn get(&self, ch: ChannelId) -> &BandAmplitudes {
        match ch {
            ChannelId::Fz => &self.fz,
            ChannelId::C3 => &self.c3,
            ChannelId::P3 => &self.p3,
        }
    }

    pub fn get_mut(&mut self, ch: ChannelId) -> &mut BandAmplitudes {
        match ch {
            ChannelId::Fz => &mut self.fz,
            ChannelId::C3 => &mut self.c3,
            ChannelId::P3 => &mut self.p3,
        }
    }
}

/// Slow sinusoidal amplitude modulation, so a synthetic session moves
/// through workload states. Theta and beta swell while alpha and delta
/// shrink, and vice versa, so the combined index swings end to end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub period_epochs: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub amplitudes: ChannelAmplitudes,
    pub noise_uv: f64,
    pub seed: u64,
    pub drift: Option<Drift>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        for ch in ChannelId::ALL {
            for (band, &a) in self.amplitudes.get(ch).iter() {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(IngestError::Config(format!("{ch}/{band} amplitude must be >= 0, got {a}")));
                }
            }
        }
        if !(self.noise_uv >= 0.0 && self.noise_uv.is_finite()) {
            return Err(IngestError::Config(format!("noise_uv must be >= 0, got {}", self.noise_uv)));
        }
        if let Some(d) = self.drift {
            if !(d.period_epochs > 0.0) || !(0.0..1.0).contains(&d.depth) {
                return Err(IngestError::Config("drift needs period_epochs > 0 and 0 <= depth < 1".into()));
            }
        }
        Ok(())
    }

    /// Convenience: a single band on a single channel, no noise.
    pub fn single(channel: ChannelId, band: Band, amplitude_uv: f64) -> Self {
        let mut spec = SyntheticSpec::default();
        spec.amplitudes.get_mut(channel)[band] = amplitude_uv;
        spec
    }
}

/// Tone frequency used for a band: the geometric midpoint of its default
/// edges, snapped to the 0.5 Hz bin grid of a two-second epoch so the tone
/// does not leak into neighbouring bands.
pub fn band_tone_hz(band: Band) -> f64 {
    let r = band.default_range();
    let resolution = 1.0 / f64::from(EPOCH_SECONDS);
    let mid = (r.f_low * r.f_high).sqrt();
    (mid / resolution).round() * resolution
}

pub fn generate_epoch(
    spec: &SyntheticSpec,
    sample_rate_hz: u32,
    session_id: &str,
    epoch_index: u64,
) -> Result<EegEpoch, IngestError> {
    spec.validate()?;
    if sample_rate_hz == 0 {
        return Err(IngestError::Config("sample_rate_hz must be positive".into()));
    }
    let n = samples_per_epoch(sample_rate_hz);
    let fs = f64::from(sample_rate_hz);
    let offset = epoch_index as f64 * n as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(epoch_index);
    let noise = Normal::new(0.0, spec.noise_uv).map_err(|e| IngestError::Config(e.to_string()))?;

    let mut samples = ChannelSamples::zeros(n);
    for ch in ChannelId::ALL {
        let amps = spec.amplitudes.get(ch);
        let out = samples.get_mut(ch);
        for band in Band::ALL {
            let a = amps[band] * drift_gain(spec.drift, band, epoch_index);
            if a == 0.0 {
                continue;
            }
            let w = 2.0 * PI * band_tone_hz(band) / fs;
            for (i, v) in out.iter_mut().enumerate() {
                *v += a * (w * (offset + i as f64)).sin();
            }
        }
        if spec.noise_uv > 0.0 {
            for v in out.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
    }
    let t_start_ms = epoch_index * u64::from(EPOCH_SECONDS) * 1000;
    EegEpoch::new(session_id, epoch_index, t_start_ms, sample_rate_hz, samples)
}

fn drift_gain(drift: Option<Drift>, band: Band, epoch_index: u64) -> f64 {
    match drift {
        None => 1.0,
        Some(d) => {
            let sign = if band.rises_with_workload() { 1.0 } else { -1.0 };
            1.0 + sign * d.depth * (2.0 * PI * epoch_index as f64 / d.period_epochs).sin()
        }
    }
}

/// Iterator over consecutive synthetic epochs, optionally bounded.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    spec: SyntheticSpec,
    sample_rate_hz: u32,
    session_id: String,
    next_index: u64,
    remaining: Option<u64>,
}

impl SyntheticSource {
    pub fn new(spec: SyntheticSpec, sample_rate_hz: u32, session_id: impl Into<String>) -> Result<Self, IngestError> {
        spec.validate()?;
        Ok(Self { spec, sample_rate_hz, session_id: session_id.into(), next_index: 0, remaining: None })
    }

    pub fn take_epochs(mut self, count: u64) -> Self {
        self.remaining = Some(count);
        self
    }
}

impl Iterator for SyntheticSource {
    type Item = Result<EegEpoch, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(rem) = self.remaining.as_mut() {
            if *rem == 0 {
                return None;
            }
            *rem -= 1;
        }
        let epoch = generate_epoch(&self.spec, self.sample_rate_hz, &self.session_id, self.next_index);
        self.next_index += 1;
        Some(epoch)
    }
}
