//! Recorded-session CSV.
//!
//! ```text
//! # sample_rate_hz=256
//! t_ms,Fz,C3,P3
//! 0,1.25,-0.5,3.0
//! ...
//! ```
//!
//! Channel columns may appear in any order after `t_ms`. Samples are cut into
//! consecutive two-second epochs; a trailing partial epoch is dropped.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{samples_per_epoch, ChannelId, ChannelSamples, EegEpoch, IngestError};

/// A fully parsed recording, already cut into epochs.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    epochs: std::vec::IntoIter<EegEpoch>,
    pub sample_rate_hz: u32,
    pub dropped_samples: usize,
}

impl ReplaySource {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.len() == 0
    }
}

impl Iterator for ReplaySource {
    type Item = Result<EegEpoch, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.epochs.next().map(Ok)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse { line, message: message.into() }
}

pub fn read_replay(path: impl AsRef<Path>) -> Result<ReplaySource, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let session_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("replay").to_string();
    parse_replay(&text, &session_id)
}

pub fn parse_replay(text: &str, session_id: &str) -> Result<ReplaySource, IngestError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (ln, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let sample_rate_hz: u32 = first
        .strip_prefix("# sample_rate_hz=")
        .ok_or_else(|| parse_err(ln, "expected `# sample_rate_hz=<int>` header"))?
        .trim()
        .parse()
        .map_err(|_| parse_err(ln, "sample_rate_hz is not a positive integer"))?;
    if sample_rate_hz == 0 {
        return Err(parse_err(ln, "sample_rate_hz must be positive"));
    }

    let (ln, header) = lines.next().ok_or_else(|| parse_err(2, "missing column header"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"t_ms") {
        return Err(parse_err(ln, "first column must be `t_ms`"));
    }
    let mut slots: Vec<ChannelId> = Vec::with_capacity(3);
    for name in &columns[1..] {
        let ch: ChannelId = name.parse().map_err(|e: String| parse_err(ln, e))?;
        if slots.contains(&ch) {
            return Err(parse_err(ln, format!("duplicate channel {ch}")));
        }
        slots.push(ch);
    }
    if let Some(missing) = ChannelId::ALL.iter().find(|c| !slots.contains(c)) {
        return Err(parse_err(ln, format!("missing channel {missing}")));
    }

    let mut times: Vec<u64> = Vec::new();
    let mut data = ChannelSamples::zeros(0);
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_err(ln, format!("expected {} fields, found {}", columns.len(), fields.len())));
        }
        let t: f64 = fields[0].parse().map_err(|_| parse_err(ln, format!("bad t_ms `{}`", fields[0])))?;
        times.push(t.max(0.0).round() as u64);
        for (ch, raw) in slots.iter().zip(&fields[1..]) {
            let v: f64 = raw.parse().map_err(|_| parse_err(ln, format!("bad {ch} value `{raw}`")))?;
            if !v.is_finite() {
                return Err(parse_err(ln, format!("{ch} value is not finite")));
            }
            data.get_mut(*ch).push(v);
        }
    }

    let per_epoch = samples_per_epoch(sample_rate_hz);
    let total = times.len();
    let n_epochs = total / per_epoch;
    let dropped = total - n_epochs * per_epoch;
    if dropped > 0 {
        tracing::warn!(dropped, "replay: dropping trailing samples that do not fill an epoch");
    }

    let mut epochs = Vec::with_capacity(n_epochs);
    for k in 0..n_epochs {
        let range = k * per_epoch..(k + 1) * per_epoch;
        let samples = ChannelSamples {
            fz: data.fz[range.clone()].to_vec(),
            c3: data.c3[range.clone()].to_vec(),
            p3: data.p3[range.clone()].to_vec(),
        };
        epochs.push(EegEpoch::new(session_id, k as u64, times[range.start], sample_rate_hz, samples)?);
    }
    Ok(ReplaySource { epochs: epochs.into_iter(), sample_rate_hz, dropped_samples: dropped })
}

/// Write epochs back out in the replay format. All epochs must share one
/// sample rate; `t_ms` may be fractional.
pub fn write_replay_csv(mut out: impl Write, epochs: &[EegEpoch]) -> Result<(), IngestError> {
    let Some(first) = epochs.first() else {
        return Err(IngestError::Config("nothing to write".into()));
    };
    let fs = first.sample_rate_hz;
    if epochs.iter().any(|e| e.sample_rate_hz != fs) {
        return Err(IngestError::Config("mixed sample rates in one recording".into()));
    }
    writeln!(out, "# sample_rate_hz={fs}")?;
    writeln!(out, "t_ms,Fz,C3,P3")?;
    for epoch in epochs {
        for i in 0..epoch.len() {
            let t = epoch.t_start_ms as f64 + i as f64 * 1000.0 / f64::from(fs);
            let s = &epoch.samples;
            writeln!(out, "{t},{},{},{}", s.fz[i], s.c3[i], s.p3[i])?;
        }
    }
    Ok(())
}
