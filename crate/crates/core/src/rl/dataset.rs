//! JSONL transition logs, one [`LoggedTransition`] per line.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{LoggedTransition, RlError};

pub fn parse_dataset(text: &str) -> Result<Vec<LoggedTransition>, RlError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: LoggedTransition =
            serde_json::from_str(line).map_err(|e| RlError::Parse { line: i + 1, message: e.to_string() })?;
        t.validate().map_err(|e| RlError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(t);
    }
    Ok(out)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<LoggedTransition>, RlError> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn write_dataset(mut out: impl Write, records: &[LoggedTransition]) -> Result<(), RlError> {
    for t in records {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Fill `behavior_prob` with the empirical frequency of the logged action in
/// its (layout, state). With `overwrite` false, only missing values are set.
pub fn estimate_behavior_probs(records: &mut [LoggedTransition], overwrite: bool) {
    let mut per_state: HashMap<(usize, usize), f64> = HashMap::new();
    let mut per_action: HashMap<(usize, usize, usize), f64> = HashMap::new();
    for t in records.iter() {
        let key = (t.layout.index(), t.state.index());
        *per_state.entry(key).or_default() += 1.0;
        *per_action.entry((key.0, key.1, t.action.index())).or_default() += 1.0;
    }
    for t in records.iter_mut() {
        if t.behavior_prob.is_some() && !overwrite {
            continue;
        }
        let key = (t.layout.index(), t.state.index());
        t.behavior_prob = Some(per_action[&(key.0, key.1, t.action.index())] / per_state[&key]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"layout":"graph","state":{"mwl":"high","difficulty":"high","current_strategy":"none"},"action":"full_adaptation","post_mwl":"optimal","accuracy":1,"reaction_time_ms":8123.5,"behavior_prob":0.14285714285714285}"#;

    #[test]
    fn parses_documented_record() {
        let d = parse_dataset(&format!("{LINE}\n\n{LINE}\n")).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].state.index(), 2 * 6 + 3);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d[..1]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), LINE);
    }

    #[test]
    fn bad_line_reports_number() {
        let text = format!("{LINE}\n{}\n", LINE.replace("\"graph\"", "\"pie\""));
        match parse_dataset(&text).unwrap_err() {
            RlError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
        let text = LINE.replace("\"accuracy\":1", "\"accuracy\":3");
        assert!(matches!(parse_dataset(&text), Err(RlError::Parse { line: 1, .. })));
    }
}
