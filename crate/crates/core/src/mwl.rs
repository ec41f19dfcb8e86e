//! Mental-workload estimation from band powers.
//!
//! Each band is graded Low / Medium / High against population quartiles,
//! with the direction flipped for bands whose power falls as workload rises
//! (alpha, delta). The grades are scored 0/1/2, combined with fixed weights
//! into an index in `[0, 2]`, and the index is cut into Low / Optimal / High.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::MwlCategory;
use crate::dsp::{Band, FeatureVector, PerBand};

#[derive(Debug, Error)]
pub enum MwlError {
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("calibration file {path} not found; create one with `neuroloop calibrate --features <jsonl> --out {path}`")]
    MissingCalibration { path: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-band workload grade. Ordered `Low < Medium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandCategory {
    Low,
    Medium,
    High,
}

impl BandCategory {
    pub fn score(self) -> f64 {
        match self {
            BandCategory::Low => 0.0,
            BandCategory::Medium => 1.0,
            BandCategory::High => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub q75: f64,
}

/// Calibration file contents: `{delta: {q25, q75}, ..., n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileThresholds {
    #[serde(flatten)]
    pub bands: PerBand<Quartiles>,
    pub n: usize,
}

impl QuantileThresholds {
    pub fn validate(&self) -> Result<(), MwlError> {
        if self.n < 2 {
            return Err(MwlError::Calibration(format!("calibration_n must be >= 2, got {}", self.n)));
        }
        for (band, q) in self.bands.iter() {
            if !(q.q25.is_finite() && q.q75.is_finite() && q.q25 <= q.q75) {
                return Err(MwlError::Calibration(format!("{band}: need finite q25 <= q75, got {} / {}", q.q25, q.q75)));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MwlError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(MwlError::MissingCalibration { path: path.display().to_string() });
        }
        let t: QuantileThresholds = serde_json::from_str(&fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MwlError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Linear interpolation between order statistics: `h = (n - 1) p`,
/// `q = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartiles of one band's population sample.
pub fn quartiles(samples: &[f64]) -> Result<Quartiles, MwlError> {
    if samples.len() < 2 {
        return Err(MwlError::Calibration(format!("need at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(MwlError::Calibration("non-finite band power in calibration set".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Quartiles { q25: quantile_sorted(&sorted, 0.25), q75: quantile_sorted(&sorted, 0.75) })
}

/// Population quartiles per band.
pub fn calibrate(samples: &PerBand<Vec<f64>>) -> Result<QuantileThresholds, MwlError> {
    let mut bands = PerBand::<Quartiles>::from_fn(|_| Quartiles { q25: 0.0, q75: 0.0 });
    for band in Band::ALL {
        bands[band] = quartiles(&samples[band]).map_err(|e| MwlError::Calibration(format!("{band}: {e}")))?;
    }
    let n = Band::ALL.iter().map(|&b| samples[b].len()).min().unwrap_or(0);
    Ok(QuantileThresholds { bands, n })
}

/// Calibrate from a set of feature vectors.
pub fn calibrate_features<'a>(features: impl IntoIterator<Item = &'a FeatureVector>) -> Result<QuantileThresholds, MwlError> {
    let mut samples = PerBand::<Vec<f64>>::default();
    for fv in features {
        for band in Band::ALL {
            samples[band].push(fv.power[band]);
        }
    }
    calibrate(&samples)
}

/// Grade one band. Values equal to a quartile are Medium.
pub fn categorize_band(power: f64, band: Band, thresholds: &QuantileThresholds) -> BandCategory {
    let q = thresholds.bands[band];
    let (below, above) = if band.rises_with_workload() {
        (BandCategory::Low, BandCategory::High)
    } else {
        (BandCategory::High, BandCategory::Low)
    };
    if power < q.q25 {
        below
    } else if power > q.q75 {
        above
    } else {
        BandCategory::Medium
    }
}

/// Non-negative band weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PerBand<f64>", into = "PerBand<f64>")]
pub struct MwlWeights(PerBand<f64>);

impl MwlWeights {
    pub fn new(weights: PerBand<f64>) -> Result<Self, MwlError> {
        if weights.iter().any(|(_, &w)| !(w >= 0.0 && w.is_finite())) {
            return Err(MwlError::Weights("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MwlError::Weights(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Self(weights))
    }

    pub fn get(&self, band: Band) -> f64 {
        self.0[band]
    }
}

impl Default for MwlWeights {
    fn default() -> Self {
        Self(PerBand::from_fn(|_| 0.25))
    }
}

impl TryFrom<PerBand<f64>> for MwlWeights {
    type Error = MwlError;

    fn try_from(w: PerBand<f64>) -> Result<Self, Self::Error> {
        MwlWeights::new(w)
    }
}

impl From<MwlWeights> for PerBand<f64> {
    fn from(w: MwlWeights) -> Self {
        w.0
    }
}

/// Cut points on the combined index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexCuts {
    pub low_below: f64,
    pub high_above: f64,
}

impl Default for IndexCuts {
    fn default() -> Self {
        Self { low_below: 0.75, high_above: 1.25 }
    }
}

impl IndexCuts {
    pub fn category(&self, index: f64) -> MwlCategory {
        if index < self.low_below {
            MwlCategory::Low
        } else if index > self.high_above {
            MwlCategory::High
        } else {
            MwlCategory::Optimal
        }
    }
}

pub fn workload_index(categories: &PerBand<BandCategory>, weights: &MwlWeights) -> f64 {
    Band::ALL.iter().map(|&b| weights.get(b) * categories[b].score()).sum()
}

pub fn combine(categories: &PerBand<BandCategory>, weights: &MwlWeights, cuts: IndexCuts) -> (f64, MwlCategory) {
    let index = workload_index(categories, weights);
    (index, cuts.category(index))
}

/// `mwl.estimate` message body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwlEstimate {
    pub session_id: String,
    pub epoch_index: u64,
    pub bands: PerBand<BandCategory>,
    pub index: f64,
    pub category: MwlCategory,
}

/// Thresholds, weights and cut points bundled for the live loop.
#[derive(Debug, Clone, PartialEq)]
pub struct MwlEstimator {
    pub thresholds: QuantileThresholds,
    pub weights: MwlWeights,
    pub cuts: IndexCuts,
}

impl MwlEstimator {
    pub fn new(thresholds: QuantileThresholds, weights: MwlWeights, cuts: IndexCuts) -> Result<Self, MwlError> {
        thresholds.validate()?;
        if !(cuts.low_below <= cuts.high_above) {
            return Err(MwlError::Weights("index cut points must satisfy low_below <= high_above".into()));
        }
        Ok(Self { thresholds, weights, cuts })
    }

    pub fn estimate(&self, features: &FeatureVector) -> MwlEstimate {
        let bands = PerBand::from_fn(|b| categorize_band(features.power[b], b, &self.thresholds));
        let (index, category) = combine(&bands, &self.weights, self.cuts);
        MwlEstimate { session_id: features.session_id.clone(), epoch_index: features.epoch_index, bands, index, category }
    }
}

pub fn estimate(features: &FeatureVector, thresholds: &QuantileThresholds, weights: &MwlWeights) -> MwlEstimate {
    let bands = PerBand::from_fn(|b| categorize_band(features.power[b], b, thresholds));
    let (index, category) = combine(&bands, weights, IndexCuts::default());
    MwlEstimate { session_id: features.session_id.clone(), epoch_index: features.epoch_index, bands, index, category }
}
