//! Zero-phase Butterworth band-pass built from second-order sections.
//!
//! The analog low-pass prototype is mapped to a band-pass around the
//! pre-warped edges, then to the z-plane by the bilinear transform, and the
//! resulting pole pairs become biquads with zeros at DC and Nyquist. An
//! order-`n` design therefore has `2n` poles, the same as scipy's
//! `butter(n, [lo, hi], "bandpass")`. [`ButterworthBandpass::filtfilt`] runs
//! the sections forward then backward, which squares the magnitude response
//! and cancels the phase.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::DspError;
use crate::ingest::EegEpoch;

/// Order used for each edge of the epoch band-pass.
pub const DEFAULT_ORDER: usize = 4;

/// Transposed direct form II biquad, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Filter state after an infinitely long constant input of value 1.
    fn unit_step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b0, self.b2 - self.a2 * g]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + z[0];
            z[0] = self.b1 * input - self.a1 * y + z[1];
            z[1] = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }

    /// |H(e^{jω})| at frequency `f`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthBandpass {
    sections: Vec<Biquad>,
    sample_rate_hz: f64,
}

impl ButterworthBandpass {
    pub fn design(order: usize, f_low: f64, f_high: f64, sample_rate_hz: f64) -> Result<Self, DspError> {
        let nyquist = sample_rate_hz / 2.0;
        if order == 0 || order % 2 != 0 {
            return Err(DspError::Config(format!("filter order must be even and positive, got {order}")));
        }
        if !(f_low > 0.0 && f_low < f_high) {
            return Err(DspError::Config(format!("need 0 < f_low < f_high, got {f_low}..{f_high}")));
        }
        if f_high >= nyquist {
            return Err(DspError::Config(format!("f_high {f_high} Hz must be below Nyquist ({nyquist} Hz)")));
        }
        let warp = |f: f64| 2.0 * sample_rate_hz * (PI * f / sample_rate_hz).tan();
        let (wl, wh) = (warp(f_low), warp(f_high));
        let (bw, w0) = (wh - wl, (wl * wh).sqrt());
        let two_fs = 2.0 * sample_rate_hz;

        let mut sections = Vec::with_capacity(order);
        for k in 0..order {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let proto = Complex64::from_polar(1.0, theta);
            let half = proto * bw / 2.0;
            let root = (half * half - w0 * w0).sqrt();
            for s in [half + root, half - root] {
                let z = (two_fs + s) / (two_fs - s);
                // each conjugate pair becomes one section
                if z.im > 0.0 {
                    sections.push(Biquad { b0: 1.0, b1: 0.0, b2: -1.0, a1: -2.0 * z.re, a2: z.norm_sqr() });
                }
            }
        }
        if sections.len() != order {
            return Err(DspError::Config(format!("band {f_low}..{f_high} Hz is too wide for a pole-pair design")));
        }
        let mut filter = Self { sections, sample_rate_hz };
        let centre = (w0 / two_fs).atan() * sample_rate_hz / PI;
        let gain = filter.magnitude(centre);
        let first = &mut filter.sections[0];
        first.b0 /= gain;
        first.b2 /= gain;
        Ok(filter)
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Single-pass magnitude response.
    pub fn magnitude(&self, f: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(f, self.sample_rate_hz)).product()
    }

    /// Causal filtering, with section states initialised to the steady state
    /// for a constant input equal to `x[0]`.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_in_place(&mut y);
        y
    }

    fn filter_in_place(&self, y: &mut [f64]) {
        let Some(&first) = y.first() else { return };
        let mut level = first;
        for s in &self.sections {
            let zi = s.unit_step_state();
            s.run(y, [zi[0] * level, zi[1] * level]);
            level *= s.dc_gain();
        }
    }

    /// Forward-backward filtering with odd-reflection padding of up to
    /// `len - 1` samples on each side.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = n - 1;
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase band-pass of every channel of `epoch`.
pub fn bandpass_filter(epoch: &EegEpoch, f_low: f64, f_high: f64) -> Result<EegEpoch, DspError> {
    let filter = ButterworthBandpass::design(DEFAULT_ORDER, f_low, f_high, f64::from(epoch.sample_rate_hz))?;
    Ok(filter_epoch(&filter, epoch))
}

pub(crate) fn filter_epoch(filter: &ButterworthBandpass, epoch: &EegEpoch) -> EegEpoch {
    epoch.map_channels(|_, data| filter.filtfilt(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn edges_are_minus_three_db() {
        let f = ButterworthBandpass::design(4, 0.5, 40.0, 256.0).unwrap();
        assert_eq!(f.sections().len(), 4);
        for hz in [0.5, 40.0] {
            assert!((db(f.magnitude(hz)) + 3.0103).abs() < 0.01, "{hz} Hz: {}", db(f.magnitude(hz)));
        }
    }

    #[test]
    fn matches_reference_design_response() {
        // scipy.signal.butter(4, [0.5, 40], "bandpass", fs=256), filtfilt gain in dB
        let f = ButterworthBandpass::design(4, 0.5, 40.0, 256.0).unwrap();
        for (hz, want) in [(1.0, -0.03), (35.0, -2.15), (50.0, -20.38), (60.0, -37.34)] {
            let got = db(f.magnitude(hz).powi(2));
            assert!((got - want).abs() < 0.01, "{hz} Hz: {got} vs {want}");
        }
    }

    #[test]
    fn zero_phase_response_meets_contract() {
        let f = ButterworthBandpass::design(4, 0.5, 40.0, 256.0).unwrap();
        // forward-backward squares the magnitude
        for hz in [1.0, 5.0, 10.0, 20.0, 35.0] {
            let g = db(f.magnitude(hz).powi(2));
            assert!(g > -3.0 && g < 0.01, "{hz} Hz: {g} dB");
        }
        assert!(db(f.magnitude(50.0).powi(2)) <= -20.0);
        assert!(db(f.magnitude(60.0).powi(2)) <= -20.0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(ButterworthBandpass::design(4, 0.5, 128.0, 256.0).is_err());
        assert!(ButterworthBandpass::design(4, 0.0, 40.0, 256.0).is_err());
        assert!(ButterworthBandpass::design(4, 40.0, 0.5, 256.0).is_err());
        assert!(ButterworthBandpass::design(3, 0.5, 40.0, 256.0).is_err());
    }

    #[test]
    fn zeros_stay_zero() {
        let f = ButterworthBandpass::design(4, 0.5, 40.0, 256.0).unwrap();
        assert!(f.filtfilt(&[0.0; 512]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_is_removed_from_steady_input() {
        let f = ButterworthBandpass::design(4, 0.5, 40.0, 256.0).unwrap();
        let y = f.filtfilt(&[3.0; 512]);
        assert!(y.iter().all(|v| v.abs() < 1e-9), "max {}", y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
}
