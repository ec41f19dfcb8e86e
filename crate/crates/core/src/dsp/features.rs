use serde::{Deserialize, Serialize};

use super::filter::{filter_epoch, ButterworthBandpass, DEFAULT_ORDER};
use super::spectrum::{Periodogram, Window};
use super::{band_power, Band, BandLayout, BandSourceMap, DspError, FeatureVector, PerBand};
use crate::ingest::{samples_per_epoch, ChannelId, EegEpoch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub filter_low_hz: f64,
    pub filter_high_hz: f64,
    pub filter_order: usize,
    pub window: Window,
    pub bands: BandLayout,
    pub sources: BandSourceMap,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            filter_low_hz: 0.5,
            filter_high_hz: 40.0,
            filter_order: DEFAULT_ORDER,
            window: Window::Rectangular,
            bands: BandLayout::default(),
            sources: BandSourceMap::default(),
        }
    }
}

/// Filter design and FFT plan prepared once for a given sample rate.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: DspConfig,
    sample_rate_hz: u32,
    filter: ButterworthBandpass,
    periodogram: Periodogram,
}

impl FeatureExtractor {
    pub fn new(config: DspConfig, sample_rate_hz: u32) -> Result<Self, DspError> {
        config.bands.validate()?;
        let fs = f64::from(sample_rate_hz);
        let filter = ButterworthBandpass::design(config.filter_order, config.filter_low_hz, config.filter_high_hz, fs)?;
        let periodogram = Periodogram::new(samples_per_epoch(sample_rate_hz), config.window);
        // surface too-narrow bands at construction rather than per epoch
        let probe = periodogram.compute(&vec![0.0; periodogram.len()], fs);
        for band in Band::ALL {
            band_power(&probe, config.bands.range(band))?;
        }
        Ok(Self { config, sample_rate_hz, filter, periodogram })
    }

    pub fn config(&self) -> &DspConfig {
        &self.config
    }

    /// Band-pass every channel, then integrate each band's PSD on its
    /// source electrode.
    pub fn extract(&self, epoch: &EegEpoch) -> Result<FeatureVector, DspError> {
        if epoch.sample_rate_hz != self.sample_rate_hz {
            return Err(DspError::Config(format!(
                "extractor planned for {} Hz, epoch is {} Hz",
                self.sample_rate_hz, epoch.sample_rate_hz
            )));
        }
        let filtered = filter_epoch(&self.filter, epoch);
        let fs = f64::from(epoch.sample_rate_hz);

        let mut psds: [Option<super::Psd>; 3] = [None, None, None];
        let mut power = PerBand::<f64>::default();
        for band in Band::ALL {
            let ch = self.config.sources.channel(band);
            let slot = &mut psds[channel_slot(ch)];
            let psd = slot.get_or_insert_with(|| self.periodogram.compute(filtered.channel(ch), fs));
            power[band] = band_power(psd, self.config.bands.range(band))?;
        }
        Ok(FeatureVector { session_id: epoch.session_id.clone(), epoch_index: epoch.epoch_index, power })
    }
}

fn channel_slot(ch: ChannelId) -> usize {
    match ch {
        ChannelId::Fz => 0,
        ChannelId::C3 => 1,
        ChannelId::P3 => 2,
    }
}

/// Default pipeline (0.5–40 Hz, rectangular window, default bands) with a
/// caller-supplied electrode map.
pub fn extract_features(epoch: &EegEpoch, map: BandSourceMap) -> Result<FeatureVector, DspError> {
    let config = DspConfig { sources: map, ..DspConfig::default() };
    FeatureExtractor::new(config, epoch.sample_rate_hz)?.extract(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ChannelSamples;

    #[test]
    fn zero_epoch_gives_zero_features() {
        let e = EegEpoch::new("s", 3, 6000, 256, ChannelSamples::zeros(512)).unwrap();
        let fv = extract_features(&e, BandSourceMap::default()).unwrap();
        assert_eq!(fv.epoch_index, 3);
        assert_eq!(fv.power, PerBand::default());
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let fx = FeatureExtractor::new(DspConfig::default(), 256).unwrap();
        let e = EegEpoch::new("s", 0, 0, 128, ChannelSamples::zeros(256)).unwrap();
        assert!(fx.extract(&e).is_err());
    }

    #[test]
    fn feature_message_shape() {
        let fv = FeatureVector {
            session_id: "s".into(),
            epoch_index: 1,
            power: PerBand { delta: 1.0, theta: 2.0, alpha: 3.0, beta: 4.0 },
        };
        let v = serde_json::to_value(&fv).unwrap();
        assert_eq!(v["power"]["alpha"], 3.0);
        assert_eq!(v["epoch_index"], 1);
    }
}
