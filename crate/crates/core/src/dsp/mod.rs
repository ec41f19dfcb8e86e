//! Band-power features: band-pass filter, one-sided PSD, band integration.

pub mod features;
pub mod filter;
pub mod spectrum;

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ChannelId;

pub use features::{extract_features, DspConfig, FeatureExtractor};
pub use filter::{bandpass_filter, Biquad, ButterworthBandpass};
pub use spectrum::{band_power, power_spectral_density, Psd, Window};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("configuration error: {0}")]
    Config(String),
}

/// EEG frequency band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
        }
    }

    /// Default `[low, high)` edges in Hz.
    pub fn default_range(self) -> BandRange {
        match self {
            Band::Delta => BandRange::new(0.5, 4.0),
            Band::Theta => BandRange::new(4.0, 8.0),
            Band::Alpha => BandRange::new(8.0, 13.0),
            Band::Beta => BandRange::new(13.0, 30.0),
        }
    }

    /// Whether band power rises with workload (theta, beta) or falls (alpha, delta).
    pub fn rises_with_workload(self) -> bool {
        matches!(self, Band::Theta | Band::Beta)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open frequency interval `[f_low, f_high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRange {
    pub f_low: f64,
    pub f_high: f64,
}

impl BandRange {
    pub const fn new(f_low: f64, f_high: f64) -> Self {
        Self { f_low, f_high }
    }

    pub fn contains(&self, f: f64) -> bool {
        self.f_low <= f && f < self.f_high
    }

    pub fn width(&self) -> f64 {
        self.f_high - self.f_low
    }
}

/// Edges for all four bands. Validated to be positive, ordered and disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandLayout {
    pub delta: BandRange,
    pub theta: BandRange,
    pub alpha: BandRange,
    pub beta: BandRange,
}

impl Default for BandLayout {
    fn default() -> Self {
        Self {
            delta: Band::Delta.default_range(),
            theta: Band::Theta.default_range(),
            alpha: Band::Alpha.default_range(),
            beta: Band::Beta.default_range(),
        }
    }
}

impl BandLayout {
    pub fn range(&self, band: Band) -> BandRange {
        match band {
            Band::Delta => self.delta,
            Band::Theta => self.theta,
            Band::Alpha => self.alpha,
            Band::Beta => self.beta,
        }
    }

    pub fn validate(&self) -> Result<(), DspError> {
        let mut ranges: Vec<(Band, BandRange)> = Band::ALL.iter().map(|&b| (b, self.range(b))).collect();
        for (b, r) in &ranges {
            if !(r.f_low > 0.0 && r.f_low < r.f_high) {
                return Err(DspError::Config(format!("band {b}: need 0 < f_low < f_high, got [{}, {})", r.f_low, r.f_high)));
            }
        }
        ranges.sort_by(|a, b| a.1.f_low.total_cmp(&b.1.f_low));
        for w in ranges.windows(2) {
            if w[1].1.f_low < w[0].1.f_high {
                return Err(DspError::Config(format!("bands {} and {} overlap", w[0].0, w[1].0)));
            }
        }
        Ok(())
    }
}

/// Which electrode each band is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSourceMap {
    pub delta: ChannelId,
    pub theta: ChannelId,
    pub alpha: ChannelId,
    pub beta: ChannelId,
}

impl Default for BandSourceMap {
    fn default() -> Self {
        Self { delta: ChannelId::Fz, theta: ChannelId::Fz, alpha: ChannelId::P3, beta: ChannelId::C3 }
    }
}

impl BandSourceMap {
    pub fn channel(&self, band: Band) -> ChannelId {
        match band {
            Band::Delta => self.delta,
            Band::Theta => self.theta,
            Band::Alpha => self.alpha,
            Band::Beta => self.beta,
        }
    }
}

/// A value per band. Serialized as `{delta, theta, alpha, beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerBand<T> {
    pub delta: T,
    pub theta: T,
    pub alpha: T,
    pub beta: T,
}

impl<T> PerBand<T> {
    pub fn from_fn(mut f: impl FnMut(Band) -> T) -> Self {
        Self { delta: f(Band::Delta), theta: f(Band::Theta), alpha: f(Band::Alpha), beta: f(Band::Beta) }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Band, &T) -> U) -> PerBand<U> {
        PerBand::from_fn(|b| f(b, &self[b]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Band, &T)> {
        Band::ALL.into_iter().map(move |b| (b, &self[b]))
    }
}

impl<T> Index<Band> for PerBand<T> {
    type Output = T;

    fn index(&self, band: Band) -> &T {
        match band {
            Band::Delta => &self.delta,
            Band::Theta => &self.theta,
            Band::Alpha => &self.alpha,
            Band::Beta => &self.beta,
        }
    }
}

impl<T> IndexMut<Band> for PerBand<T> {
    fn index_mut(&mut self, band: Band) -> &mut T {
        match band {
            Band::Delta => &mut self.delta,
            Band::Theta => &mut self.theta,
            Band::Alpha => &mut self.alpha,
            Band::Beta => &mut self.beta,
        }
    }
}

/// Band powers for one epoch, in µV² (PSD integrated over the band).
/// This is also the `features.bandpower` message body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub session_id: String,
    pub epoch_index: u64,
    pub power: PerBand<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bands_are_valid_and_tile_half_to_thirty() {
        let layout = BandLayout::default();
        layout.validate().unwrap();
        assert_eq!(layout.delta.f_low, 0.5);
        assert_eq!(layout.beta.f_high, 30.0);
        for w in Band::ALL.windows(2) {
            assert_eq!(layout.range(w[0]).f_high, layout.range(w[1]).f_low);
        }
    }

    #[test]
    fn overlapping_bands_rejected() {
        let mut layout = BandLayout::default();
        layout.theta.f_high = 9.0;
        assert!(matches!(layout.validate(), Err(DspError::Config(_))));
    }

    #[test]
    fn default_source_map() {
        let m = BandSourceMap::default();
        assert_eq!(m.channel(Band::Alpha), ChannelId::P3);
        assert_eq!(m.channel(Band::Beta), ChannelId::C3);
        assert_eq!(m.channel(Band::Theta), ChannelId::Fz);
        assert_eq!(m.channel(Band::Delta), ChannelId::Fz);
    }
}
