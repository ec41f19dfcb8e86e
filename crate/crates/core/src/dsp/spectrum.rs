//! One-sided power spectral density from a single FFT per epoch.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{BandRange, DspError};
use crate::ingest::{ChannelId, EegEpoch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect(),
        }
    }
}

/// One-sided PSD on the grid `k * df`, `k = 0..=N/2`, in µV²/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub df: f64,
    pub values: Vec<f64>,
}

impl Psd {
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &p)| (self.frequency(k), p))
    }

    /// Σ psd · Δf over all bins; equals the mean square of the input for the
    /// rectangular window.
    pub fn total_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.df
    }

    /// Σ psd · Δf over bins with `f_low <= f < f_high`.
    pub fn power_in(&self, range: BandRange) -> f64 {
        self.iter().filter(|(f, _)| range.contains(*f)).map(|(_, p)| p).sum::<f64>() * self.df
    }
}

/// Reusable FFT plan for a fixed epoch length.
#[derive(Clone)]
pub struct Periodogram {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    window_power: f64,
}

impl std::fmt::Debug for Periodogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Periodogram").field("len", &self.window.len()).finish()
    }
}

impl Periodogram {
    pub fn new(len: usize, window: Window) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let window = window.coefficients(len);
        let window_power = window.iter().map(|w| w * w).sum();
        Self { fft, window, window_power }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// `psd[k] = scale(k) |X_k|^2 / (fs * Σ w^2)` with `scale = 2` except at
    /// DC and Nyquist.
    pub fn compute(&self, x: &[f64], sample_rate_hz: f64) -> Psd {
        let n = self.len();
        assert_eq!(x.len(), n, "periodogram planned for {n} samples");
        let mut buf: Vec<Complex<f64>> = x.iter().zip(&self.window).map(|(&v, &w)| Complex::new(v * w, 0.0)).collect();
        self.fft.process(&mut buf);

        let norm = sample_rate_hz * self.window_power;
        let half = n / 2;
        let values = (0..=half)
            .map(|k| {
                let scale = if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 };
                scale * buf[k].norm_sqr() / norm
            })
            .collect();
        Psd { df: sample_rate_hz / n as f64, values }
    }
}

pub fn power_spectral_density(epoch: &EegEpoch, channel: ChannelId, window: Window) -> Psd {
    let data = epoch.channel(channel);
    Periodogram::new(data.len(), window).compute(data, f64::from(epoch.sample_rate_hz))
}

/// Integrated power of `psd` over `range`.
pub fn band_power(psd: &Psd, range: BandRange) -> Result<f64, DspError> {
    let nyquist = psd.frequency(psd.values.len().saturating_sub(1));
    if range.f_high > nyquist + psd.df {
        return Err(DspError::Config(format!(
            "band [{}, {}) exceeds spectrum upper edge {nyquist} Hz",
            range.f_low, range.f_high
        )));
    }
    if !psd.iter().any(|(f, _)| range.contains(f)) {
        return Err(DspError::Config(format!(
            "band [{}, {}) contains no bins at {} Hz resolution",
            range.f_low, range.f_high, psd.df
        )));
    }
    Ok(psd.power_in(range))
}
