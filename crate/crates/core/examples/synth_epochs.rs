//! Generate a few synthetic epochs and write them as replay CSV on stdout.
//!
//! ```text
//! cargo run --example synth_epochs > epochs.csv
//! ```

use neuroloop::ingest::{write_replay_csv, ChannelId, SyntheticSource};
use neuroloop::orchestrator::config::demo_spec;

fn main() -> anyhow::Result<()> {
    let epochs: Vec<_> = SyntheticSource::new(demo_spec(), 256, "demo")?.take_epochs(4).collect::<Result<_, _>>()?;
    for e in &epochs {
        let p3 = e.channel(ChannelId::P3);
        let rms = (p3.iter().map(|v| v * v).sum::<f64>() / p3.len() as f64).sqrt();
        eprintln!("epoch {}: {} samples, P3 rms {rms:.2} uV", e.epoch_index, e.len());
    }
    write_replay_csv(std::io::stdout().lock(), &epochs)?;
    Ok(())
}
