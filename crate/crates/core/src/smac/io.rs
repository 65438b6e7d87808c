//! Run histories as JSON lines, one evaluation per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{HistoryEntry, Origin, RunHistory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryLine {
    pub iteration: u32,
    pub origin: Origin,
    pub theta: Vec<f64>,
    pub value: f64,
    /// Seconds since the run started when the evaluation was recorded.
    pub wall_time: f64,
}

impl HistoryLine {
    pub fn new(entry: &HistoryEntry, wall_time: f64) -> Self {
        Self {
            iteration: entry.iteration,
            origin: entry.origin,
            theta: entry.theta.clone(),
            value: entry.value,
            wall_time,
        }
    }

    pub fn entry(&self) -> HistoryEntry {
        HistoryEntry {
            theta: self.theta.clone(),
            value: self.value,
            origin: self.origin,
            iteration: self.iteration,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HistoryIoError {
    #[error("history line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_history_lines<W: Write>(
    mut out: W,
    entries: &[HistoryEntry],
    wall_time: f64,
) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, &HistoryLine::new(e, wall_time))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read lines, skipping blank ones. A truncated final line (from a writer
/// that is still running) is reported as an error like any other.
pub fn read_history_lines<R: BufRead>(input: R) -> Result<Vec<HistoryLine>, HistoryIoError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: HistoryLine = serde_json::from_str(&line)
            .map_err(|e| HistoryIoError::Format { line: i + 1, message: e.to_string() })?;
        out.push(parsed);
    }
    Ok(out)
}

pub fn history_from_lines(lines: &[HistoryLine]) -> RunHistory {
    let mut h = RunHistory::default();
    for l in lines {
        h.push(l.entry());
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let entries = vec![
            HistoryEntry {
                theta: vec![0.1, 1e6, -3.25],
                value: -17.000000000000004,
                origin: Origin::Initial,
                iteration: 0,
            },
            HistoryEntry {
                theta: vec![0.0, 2.0, 1.0 / 3.0],
                value: 2.5,
                origin: Origin::Random,
                iteration: 1,
            },
        ];
        let mut buf = Vec::new();
        write_history_lines(&mut buf, &entries, 0.5).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"origin\":\"random\""));
        let lines = read_history_lines(&buf[..]).unwrap();
        assert_eq!(history_from_lines(&lines).entries(), &entries[..]);
    }

    #[test]
    fn bad_line_reports_position() {
        let text =
            "\n{\"iteration\":0,\"origin\":\"initial\",\"theta\":[1],\"value\":1,\"wall_time\":0}\n{oops\n";
        match read_history_lines(text.as_bytes()) {
            Err(HistoryIoError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
