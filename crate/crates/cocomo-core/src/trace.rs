//! Trace records: the bit-exact event log a simulation run produces.
//! Persisted as JSON Lines, one record per line, UTF-8 with LF terminators.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{TaskId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraceKind {
    Admit,
    Interrupt,
    Dispatch,
    QuantumEnd,
    Preempt,
    Fade,
    Block,
    Unblock,
    Complete,
    Age,
    Reprioritize,
    Reward,
    Feedback,
}

/// One scheduler event. Records are strictly ordered by (t, emission
/// sequence); `detail` keys are sorted so serialization is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: Tick,
    pub kind: TraceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detail: BTreeMap<String, String>,
}

impl TraceRecord {
    pub fn new(t: Tick, kind: TraceKind, task: Option<TaskId>) -> Self {
        TraceRecord {
            t,
            kind,
            task,
            detail: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.detail.insert(key.to_string(), value.to_string());
        self
    }
}

pub type Trace = Vec<TraceRecord>;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// Writes one compact JSON object per record, LF-terminated.
pub fn write_jsonl<W: Write>(trace: &[TraceRecord], mut out: W) -> Result<(), TraceError> {
    for record in trace {
        let line = serde_json::to_string(record).expect("trace records serialize");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(trace: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_jsonl(trace, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("trace is UTF-8")
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Trace, TraceError> {
    let mut trace = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| TraceError::Parse {
            line: idx + 1,
            source,
        })?;
        trace.push(record);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_preserves_records_and_bytes() {
        let trace = vec![
            TraceRecord::new(0, TraceKind::Admit, Some(1))
                .with("class", "siren")
                .with("work", 5),
            TraceRecord::new(0, TraceKind::Interrupt, Some(1)).with("level", 0),
            TraceRecord::new(5, TraceKind::Complete, Some(1)),
        ];
        let text = to_jsonl(&trace);
        assert!(text.ends_with('\n'));
        let back = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, trace);
        assert_eq!(to_jsonl(&back), text);
    }

    #[test]
    fn record_without_task_omits_the_field() {
        let rec = TraceRecord::new(3, TraceKind::Reprioritize, None);
        let line = serde_json::to_string(&rec).unwrap();
        assert_eq!(line, r#"{"t":3,"kind":"Reprioritize"}"#);
    }
}
