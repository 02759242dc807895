use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::error::{Error, Result};
use crate::numfmt::f64_17;

/// One attack on one client under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub scenario: String,
    pub seed: u64,
    pub target: usize,
    pub method: Method,
    /// `passive`, `active` or `oracle`.
    pub adversary: String,
    pub active_rounds: usize,
    /// Missing when the dataset has no sensitive attribute.
    pub accuracy: Option<f64>,
    pub recon_l2: Option<f64>,
    pub seconds: f64,
}

/// Seed-aggregated result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub method: Method,
    pub adversary: String,
    pub active_rounds: usize,
    pub accuracy_mean: Option<f64>,
    /// Population standard deviation over seeds.
    pub accuracy_std: Option<f64>,
    pub recon_l2: Option<f64>,
    pub seconds: f64,
}

pub const REPORT_COLUMNS: [&str; 8] = [
    "scenario",
    "method",
    "adversary",
    "active_rounds",
    "accuracy_mean",
    "accuracy_std",
    "recon_l2",
    "seconds",
];

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Averages over targets within a seed, then takes mean and standard
/// deviation across seeds. Groups keep their first-seen order.
pub fn aggregate_rows(raw: &[RawRow]) -> Vec<ResultRow> {
    type Key = (String, Method, String, usize);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, BTreeMap<u64, Vec<&RawRow>>> = BTreeMap::new();
    for r in raw {
        let key = (r.scenario.clone(), r.method, r.adversary.clone(), r.active_rounds);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().entry(r.seed).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let per_seed = &groups[&key];
            let acc: Option<Vec<f64>> = per_seed
                .values()
                .map(|rows| {
                    let v: Option<Vec<f64>> = rows.iter().map(|r| r.accuracy).collect();
                    v.map(|v| mean(&v))
                })
                .collect();
            let recon: Vec<f64> = per_seed.values().flatten().filter_map(|r| r.recon_l2).collect();
            let seconds: f64 = per_seed.values().flatten().map(|r| r.seconds).sum();
            let (scenario, method, adversary, active_rounds) = key;
            ResultRow {
                scenario,
                method,
                adversary,
                active_rounds,
                accuracy_mean: acc.as_deref().map(mean),
                accuracy_std: acc.as_deref().map(pop_std),
                recon_l2: (!recon.is_empty()).then(|| mean(&recon)),
                seconds,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(f64_17).unwrap_or_default()
}

fn csv_text<F>(header: &[&str], rows: usize, mut record: F) -> Result<String>
where
    F: FnMut(usize) -> Vec<String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Data(e.to_string()))?;
    for i in 0..rows {
        w.write_record(record(i)).map_err(|e| Error::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// CSV with the fixed column order; floats carry 17 significant digits and a
/// missing reconstruction error is an empty cell.
pub fn emit_report(rows: &[ResultRow]) -> Result<String> {
    csv_text(&REPORT_COLUMNS, rows.len(), |i| {
        let r = &rows[i];
        vec![
            r.scenario.clone(),
            r.method.to_string(),
            r.adversary.clone(),
            r.active_rounds.to_string(),
            opt(r.accuracy_mean),
            opt(r.accuracy_std),
            opt(r.recon_l2),
            f64_17(r.seconds),
        ]
    })
}

pub fn emit_raw(rows: &[RawRow]) -> Result<String> {
    let header = [
        "scenario", "seed", "target", "method", "adversary", "active_rounds", "accuracy", "recon_l2", "seconds",
    ];
    csv_text(&header, rows.len(), |i| {
        let r = &rows[i];
        vec![
            r.scenario.clone(),
            r.seed.to_string(),
            r.target.to_string(),
            r.method.to_string(),
            r.adversary.clone(),
            r.active_rounds.to_string(),
            opt(r.accuracy),
            opt(r.recon_l2),
            f64_17(r.seconds),
        ]
    })
}

/// Fixed-width table for terminals.
pub fn format_table(rows: &[ResultRow]) -> String {
    let mut out = format!(
        "{:<20} {:<13} {:<9} {:>6} {:>16} {:>12} {:>9}\n",
        "scenario", "method", "adversary", "rounds", "accuracy (%)", "recon_l2", "seconds"
    );
    for r in rows {
        let recon = r.recon_l2.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        let acc = match (r.accuracy_mean, r.accuracy_std) {
            (Some(m), Some(s)) => format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s),
            _ => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<20} {:<13} {:<9} {:>6} {:>16} {:>12} {:>9.2}",
            r.scenario,
            r.method.name(),
            r.adversary,
            r.active_rounds,
            acc,
            recon,
            r.seconds
        );
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(seed: u64, target: usize, acc: f64) -> RawRow {
        let acc = Some(acc);
        RawRow {
            scenario: "s".into(),
            seed,
            target,
            method: Method::OursPassive,
            adversary: "passive".into(),
            active_rounds: 0,
            accuracy: acc,
            recon_l2: Some(0.5),
            seconds: 1.0,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(
            emit_report(&[]).unwrap(),
            "scenario,method,adversary,active_rounds,accuracy_mean,accuracy_std,recon_l2,seconds\n"
        );
    }

    #[test]
    fn aggregation_over_targets_then_seeds() {
        let rows = aggregate_rows(&[raw(0, 0, 0.5), raw(0, 1, 0.7), raw(1, 0, 0.8)]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].accuracy_mean.unwrap() - 0.7).abs() < 1e-15);
        assert!((rows[0].accuracy_std.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(rows[0].recon_l2, Some(0.5));
    }

    #[test]
    fn one_row_parses_back_exactly() {
        let mut r = aggregate_rows(&[raw(0, 0, 1.0 / 3.0)]);
        r[0].recon_l2 = None;
        let text = emit_report(&r).unwrap();
        assert_eq!(text.lines().count(), 2);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let rec = reader.records().next().unwrap().unwrap();
        assert_eq!(rec.get(1), Some("Ours-passive"));
        assert_eq!(rec.get(4).unwrap().parse::<f64>().unwrap().to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(rec.get(6), Some(""));
    }
}
