//! Eavesdropped message logs and their JSON-lines persistence.
//!
//! Each round contributes two lines, the message the client received
//! (`"phase":"in"`) followed by the model it sent back (`"phase":"out"`).
//! Floats are written with 17 significant digits so that a reload is
//! bit-identical. Rounds where the server tampered with the broadcast carry
//! an extra `"active":true` on their `in` line.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelParams, ModelShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    In,
    Out,
}

/// One exchange: `sent` is what the client received at `round`, `received`
/// what it returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEntry {
    pub round: usize,
    pub sent: ModelParams,
    pub received: ModelParams,
    #[serde(default)]
    pub active: bool,
}

impl MessageEntry {
    /// `sent - received`.
    pub fn pseudo_gradient(&self) -> Vec<f64> {
        self.sent
            .values()
            .iter()
            .zip(self.received.values())
            .map(|(a, b)| a - b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLog {
    client: usize,
    entries: Vec<MessageEntry>,
}

#[derive(Deserialize)]
struct Line {
    round: usize,
    phase: Phase,
    params: Vec<f64>,
    #[serde(default)]
    active: bool,
}

impl MessageLog {
    pub fn new(client: usize) -> Self {
        Self { client, entries: Vec::new() }
    }

    pub fn client(&self) -> usize {
        self.client
    }

    pub fn entries(&self) -> &[MessageEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn shape(&self) -> Option<ModelShape> {
        self.entries.first().map(|e| e.sent.shape())
    }

    pub fn push(&mut self, entry: MessageEntry) -> Result<()> {
        entry.sent.ensure_same_shape(&entry.received)?;
        if let Some(last) = self.entries.last() {
            if entry.round <= last.round {
                return Err(Error::Protocol(format!(
                    "round {} logged after round {}",
                    entry.round, last.round
                )));
            }
            last.sent.ensure_same_shape(&entry.sent)?;
        }
        self.entries.push(entry);
        Ok(())
    }

    /// All logged rounds.
    pub fn inspected_rounds(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.round).collect()
    }

    /// Rounds whose broadcast was replaced by the adversary.
    pub fn active_rounds(&self) -> Vec<usize> {
        self.entries.iter().filter(|e| e.active).map(|e| e.round).collect()
    }

    pub fn entry(&self, round: usize) -> Option<&MessageEntry> {
        self.entries
            .binary_search_by_key(&round, |e| e.round)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Entries for the given rounds, in the order requested.
    pub fn select(&self, rounds: &[usize]) -> Result<Vec<&MessageEntry>> {
        rounds
            .iter()
            .map(|&r| {
                self.entry(r).ok_or_else(|| {
                    Error::InvalidArgument(format!("round {r} is not in the log of client {}", self.client))
                })
            })
            .collect()
    }

    /// Sub-log restricted to `rounds`.
    pub fn restrict(&self, rounds: &[usize]) -> Result<Self> {
        let mut sorted = rounds.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut out = Self::new(self.client);
        for e in self.select(&sorted)? {
            out.push(e.clone())?;
        }
        Ok(out)
    }

    pub fn passive_only(&self) -> Self {
        Self {
            client: self.client,
            entries: self.entries.iter().filter(|e| !e.active).cloned().collect(),
        }
    }

    pub fn last_response(&self) -> Option<&ModelParams> {
        self.entries.last().map(|e| &e.received)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            push_line(&mut out, e.round, Phase::In, e.sent.values(), e.active);
            push_line(&mut out, e.round, Phase::Out, e.received.values(), false);
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Parses the JSON-lines format. Without a `shape`, parameters are read
    /// as a linear model of the logged width.
    pub fn from_jsonl(client: usize, text: &str, shape: Option<ModelShape>) -> Result<Self> {
        Self::parse(client, text.lines().map(|l| Ok(l.to_string())), shape, Path::new("<memory>"))
    }

    pub fn read_jsonl(path: &Path, client: usize, shape: Option<ModelShape>) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let lines = BufReader::new(file).lines();
        Self::parse(client, lines.map(|l| l.map_err(|e| Error::io(path, e))), shape, path)
    }

    fn parse<I>(client: usize, lines: I, shape: Option<ModelShape>, path: &Path) -> Result<Self>
    where
        I: Iterator<Item = Result<String>>,
    {
        let fmt_err = |line: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut log = Self::new(client);
        let mut pending: Option<(usize, ModelParams, bool)> = None;
        for (i, raw) in lines.enumerate() {
            let raw = raw?;
            let lineno = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(&raw).map_err(|e| fmt_err(lineno, e.to_string()))?;
            let shape = shape.unwrap_or(ModelShape::Linear { dim: line.params.len() });
            let params = ModelParams::new(shape, line.params).map_err(|e| fmt_err(lineno, e.to_string()))?;
            match (line.phase, pending.take()) {
                (Phase::In, None) => pending = Some((line.round, params, line.active)),
                (Phase::Out, Some((round, sent, active))) if round == line.round => {
                    log.push(MessageEntry { round, sent, received: params, active })
                        .map_err(|e| fmt_err(lineno, e.to_string()))?;
                }
                (Phase::Out, Some((round, ..))) => {
                    return Err(fmt_err(lineno, format!("`out` for round {} follows `in` for round {round}", line.round)));
                }
                (Phase::Out, None) => return Err(fmt_err(lineno, "`out` line without a preceding `in`".into())),
                (Phase::In, Some((round, ..))) => {
                    return Err(fmt_err(lineno, format!("round {round} has no `out` line")));
                }
            }
        }
        if let Some((round, ..)) = pending {
            return Err(fmt_err(0, format!("round {round} has no `out` line")));
        }
        Ok(log)
    }
}

fn push_line(out: &mut String, round: usize, phase: Phase, params: &[f64], active: bool) {
    let phase = match phase {
        Phase::In => "in",
        Phase::Out => "out",
    };
    let _ = write!(out, "{{\"round\":{round},\"phase\":\"{phase}\",\"params\":");
    crate::numfmt::push_json_array(out, params);
    if active {
        out.push_str(",\"active\":true");
    }
    out.push_str("}\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lin(v: &[f64]) -> ModelParams {
        ModelParams::linear(v.to_vec()).unwrap()
    }

    #[test]
    fn rounds_must_increase() {
        let mut log = MessageLog::new(0);
        log.push(MessageEntry { round: 2, sent: lin(&[1.0]), received: lin(&[0.5]), active: false }).unwrap();
        let again = MessageEntry { round: 2, sent: lin(&[1.0]), received: lin(&[0.5]), active: false };
        assert!(matches!(log.push(again), Err(Error::Protocol(_))));
        let wrong = MessageEntry { round: 3, sent: lin(&[1.0, 2.0]), received: lin(&[0.5]), active: false };
        assert!(log.push(wrong).is_err());
    }

    #[test]
    fn jsonl_layout() {
        let mut log = MessageLog::new(1);
        log.push(MessageEntry { round: 0, sent: lin(&[1.0, -0.1]), received: lin(&[0.5, 2.0]), active: true }).unwrap();
        let text = log.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["round"], 0);
        assert_eq!(first["phase"], "in");
        assert_eq!(first["active"], true);
        assert_eq!(first["params"][1].as_f64(), Some(-0.1));
        assert!(lines[1].contains("\"phase\":\"out\""));
        assert_eq!(MessageLog::from_jsonl(1, &text, None).unwrap(), log);
    }

    #[test]
    fn malformed_files_report_the_line() {
        let text = "{\"round\":0,\"phase\":\"in\",\"params\":[1.0]}\n{\"round\":1,\"phase\":\"out\",\"params\":[1.0]}\n";
        match MessageLog::from_jsonl(0, text, None) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(MessageLog::from_jsonl(0, "{\"round\":0,\"phase\":\"in\",\"params\":[1.0]}\n", None).is_err());
        assert!(MessageLog::from_jsonl(0, "not json\n", None).is_err());
    }

    proptest! {
        #[test]
        fn jsonl_round_trip_is_bitwise(
            values in proptest::collection::vec(
                (proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, any::<f64>()
                    .prop_filter("finite", |v| v.is_finite())), 1..20),
            active in any::<bool>(),
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
            let mut log = MessageLog::new(3);
            log.push(MessageEntry { round: 4, sent: lin(&a), received: lin(&b), active }).unwrap();
            log.push(MessageEntry { round: 9, sent: lin(&b), received: lin(&a), active: false }).unwrap();
            let back = MessageLog::from_jsonl(3, &log.to_jsonl(), None).unwrap();
            for (x, y) in back.entries().iter().zip(log.entries()) {
                prop_assert_eq!(x.round, y.round);
                prop_assert_eq!(x.active, y.active);
                for (p, q) in x.sent.values().iter().zip(y.sent.values()).chain(x.received.values().iter().zip(y.received.values())) {
                    prop_assert_eq!(p.to_bits(), q.to_bits());
                }
            }
        }
    }
}
