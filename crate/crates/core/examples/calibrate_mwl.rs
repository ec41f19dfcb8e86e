//! Calibrate quartile thresholds from a rest baseline, then grade new epochs.

use neuroloop::dsp::FeatureExtractor;
use neuroloop::ingest::SyntheticSource;
use neuroloop::mwl::{calibrate_features, MwlEstimator};
use neuroloop::orchestrator::config::demo_spec;
use neuroloop::orchestrator::Config;

fn main() -> anyhow::Result<()> {
    let cfg = Config::default();
    let extractor = FeatureExtractor::new(cfg.dsp.clone(), 256)?;
    let features = |session: &str, n: u64| -> anyhow::Result<Vec<_>> {
        SyntheticSource::new(demo_spec(), 256, session)?
            .take_epochs(n)
            .map(|e| Ok(extractor.extract(&e?)?))
            .collect()
    };

    let baseline = features("baseline", 120)?;
    let thresholds = calibrate_features(&baseline)?;
    println!("{}", serde_json::to_string_pretty(&thresholds)?);

    let estimator = MwlEstimator::new(thresholds, cfg.mwl.weights, cfg.mwl.cuts)?;
    // The demo signal drifts with a 24-epoch period; one period visits all three grades.
    for fv in features("task", 24)? {
        let est = estimator.estimate(&fv);
        let b = est.bands;
        println!(
            "epoch {:>2}: delta {:?} theta {:?} alpha {:?} beta {:?} -> index {:.2} {:?}",
            est.epoch_index, b.delta, b.theta, b.alpha, b.beta, est.index, est.category
        );
    }
    Ok(())
}
