//! Filter an epoch and integrate its spectrum into the four band powers.

use neuroloop::dsp::{band_power, bandpass_filter, power_spectral_density, Band, BandSourceMap, FeatureExtractor, Window};
use neuroloop::ingest::{generate_epoch, ChannelId, SyntheticSpec};

fn main() -> anyhow::Result<()> {
    // 10 Hz on P3 only; everything should land in alpha.
    let spec = SyntheticSpec::single(ChannelId::P3, Band::Alpha, 10.0);
    let epoch = generate_epoch(&spec, 256, "demo", 0)?;

    let filtered = bandpass_filter(&epoch, 0.5, 40.0)?;
    let psd = power_spectral_density(&filtered, ChannelId::P3, Window::Rectangular);
    let peak = (0..psd.values.len()).max_by(|&a, &b| psd.values[a].total_cmp(&psd.values[b])).unwrap();
    println!("P3 peak at {:.1} Hz, bin width {:.2} Hz", psd.frequency(peak), psd.df);
    for band in Band::ALL {
        println!("  {band:<5} {:>10.4} uV^2", band_power(&psd, band.default_range())?);
    }

    // The extractor does the same per band, each from its own electrode.
    let fv = FeatureExtractor::new(Default::default(), 256)?.extract(&epoch)?;
    let map = BandSourceMap::default();
    for (band, p) in fv.power.iter() {
        println!("{band} from {}: {p:.4}", map.channel(band));
    }
    Ok(())
}
