use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pool::Pool;
use crate::error::{Error, Result};
use crate::federated::ClientDataset;
use crate::linalg::RowMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitiveSpec {
    pub column: String,
    /// Raw values mapped to 1; everything else becomes 0.
    pub positive: Vec<String>,
}

/// Column roles for [`ingest_csv`], usually loaded from TOML.
///
/// Columns not named anywhere are dropped. The encoded column order is:
/// numeric, one-hot categorical (levels sorted), binarized, sensitive,
/// intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub target: String,
    pub sensitive: SensitiveSpec,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Column -> values mapped to 1.
    #[serde(default)]
    pub binarize: BTreeMap<String, Vec<String>>,
    /// Column -> (raw value -> group), applied before one-hot encoding. A
    /// `"*"` entry catches unmapped values; without one they pass through.
    #[serde(default)]
    pub recode: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub standardize_target: bool,
}

fn default_true() -> bool {
    true
}

impl CsvSchema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Self = toml::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let names = std::iter::once(&self.target)
            .chain(std::iter::once(&self.sensitive.column))
            .chain(&self.numeric)
            .chain(&self.categorical)
            .chain(self.binarize.keys());
        for name in names {
            if !seen.insert(name) {
                return Err(Error::Config(format!("column `{name}` has more than one role")));
            }
        }
        if let Some(c) = self.recode.keys().find(|c| !self.categorical.contains(c)) {
            return Err(Error::Config(format!("recoded column `{c}` is not categorical")));
        }
        Ok(())
    }
}

fn ingest_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Ingest { row, column: column.to_string(), message: message.into() }
}

/// Mean and population standard deviation over `rows`; a constant column
/// keeps scale 1.
fn zscore_params(values: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| values[i]).sum::<f64>() / n;
    let var = rows.iter().map(|&i| (values[i] - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

/// Reads a headed CSV and encodes it per `schema`. Standardization
/// statistics come from `fit_rows` (all rows when `None`).
pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema, fit_rows: Option<&[usize]>) -> Result<Pool> {
    schema.validate()?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers().map_err(|e| ingest_err(0, "", e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest_err(0, name, "missing column"))
    };
    let target_idx = col(&schema.target)?;
    let sens_idx = col(&schema.sensitive.column)?;
    let numeric_idx: Vec<usize> = schema.numeric.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let cat_idx: Vec<usize> = schema.categorical.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let bin_idx: Vec<usize> = schema.binarize.keys().map(|c| col(c)).collect::<Result<_>>()?;

    let mut targets = Vec::new();
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); numeric_idx.len()];
    let mut cats: Vec<Vec<String>> = vec![Vec::new(); cat_idx.len()];
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); bin_idx.len()];
    let mut sensitive = Vec::new();
    for (r, record) in csv.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| ingest_err(row, "", e.to_string()))?;
        let cell = |i: usize, name: &str| record.get(i).ok_or_else(|| ingest_err(row, name, "missing cell"));
        let parse = |i: usize, name: &str| -> Result<f64> {
            let raw = cell(i, name)?;
            let v: f64 = raw
                .parse()
                .map_err(|_| ingest_err(row, name, format!("cannot parse `{raw}` as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ingest_err(row, name, format!("non-finite value `{raw}`")))
            }
        };
        targets.push(parse(target_idx, &schema.target)?);
        for (k, (&i, name)) in numeric_idx.iter().zip(&schema.numeric).enumerate() {
            numeric[k].push(parse(i, name)?);
        }
        for (k, (&i, name)) in cat_idx.iter().zip(&schema.categorical).enumerate() {
            let raw = cell(i, name)?;
            let level = match schema.recode.get(name) {
                Some(map) => map.get(raw).or_else(|| map.get("*")).map_or(raw, String::as_str),
                None => raw,
            };
            cats[k].push(level.to_string());
        }
        for (k, (&i, (name, positive))) in bin_idx.iter().zip(&schema.binarize).enumerate() {
            let raw = cell(i, name)?;
            bins[k].push(if positive.iter().any(|p| p == raw) { 1.0 } else { 0.0 });
        }
        let raw = cell(sens_idx, &schema.sensitive.column)?;
        sensitive.push(if schema.sensitive.positive.iter().any(|p| p == raw) { 1.0 } else { 0.0 });
    }
    let n = targets.len();
    if n == 0 {
        return Err(ingest_err(0, "", "no data rows"));
    }
    let all: Vec<usize> = (0..n).collect();
    let fit = fit_rows.unwrap_or(&all);
    if fit.is_empty() || fit.iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument("standardization rows must be non-empty and in range".into()));
    }

    let mut columns: Vec<String> = Vec::new();
    let mut encoded: Vec<Vec<f64>> = Vec::new();
    for (name, values) in schema.numeric.iter().zip(&numeric) {
        let (mean, sd) = zscore_params(values, fit);
        encoded.push(values.iter().map(|v| (v - mean) / sd).collect());
        columns.push(name.clone());
    }
    for (name, values) in schema.categorical.iter().zip(&cats) {
        let levels: BTreeSet<&String> = values.iter().collect();
        for level in levels {
            encoded.push(values.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect());
            columns.push(format!("{name}={level}"));
        }
    }
    for (name, values) in schema.binarize.keys().zip(bins) {
        encoded.push(values);
        columns.push(name.clone());
    }
    let sensitive_col = encoded.len();
    encoded.push(sensitive);
    columns.push(schema.sensitive.column.clone());
    if schema.intercept {
        encoded.push(vec![1.0; n]);
        columns.push("intercept".into());
    }
    if schema.standardize_target {
        let (mean, sd) = zscore_params(&targets, fit);
        for t in &mut targets {
            *t = (*t - mean) / sd;
        }
    }
    let width = encoded.len();
    let mut data = Vec::with_capacity(n * width);
    for i in 0..n {
        data.extend(encoded.iter().map(|c| c[i]));
    }
    let dataset = ClientDataset::new(RowMatrix::new(n, width, data)?, targets, Some(sensitive_col))?;
    Pool::new(dataset, columns)
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema, fit_rows: Option<&[usize]>) -> Result<Pool> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema, fit_rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"
        target = "charges"
        numeric = ["age", "bmi"]
        categorical = ["region"]
        [sensitive]
        column = "smoker"
        positive = ["yes"]
    "#;

    const CSV: &str = "age,bmi,region,smoker,charges\n19,27.9,south,yes,16884.9\n18,33.8,north,no,1725.5\n28,33.0,south,no,4449.4\n";

    #[test]
    fn encoding_width_and_order() {
        let schema = CsvSchema::from_toml_str(SCHEMA).unwrap();
        let pool = ingest_reader(CSV.as_bytes(), &schema, None).unwrap();
        assert_eq!(pool.columns, vec!["age", "bmi", "region=north", "region=south", "smoker", "intercept"]);
        let d = &pool.dataset;
        assert_eq!(d.dim(), 2 + 2 + 1 + 1);
        assert_eq!(d.sensitive_col(), Some(4));
        assert_eq!(d.sensitive_values().unwrap(), vec![1, 0, 0]);
        assert_eq!(d.features().row(1)[2..], [1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn errors_carry_location() {
        let schema = CsvSchema::from_toml_str(SCHEMA).unwrap();
        let bad = "age,bmi,region,smoker,charges\n19,27.9,south,yes,1.0\n18,abc,north,no,2.0\n";
        match ingest_reader(bad.as_bytes(), &schema, None) {
            Err(Error::Ingest { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "bmi")),
            other => panic!("unexpected {other:?}"),
        }
        let missing = "age,region,smoker,charges\n19,south,yes,1.0\n";
        match ingest_reader(missing.as_bytes(), &schema, None) {
            Err(Error::Ingest { column, .. }) => assert_eq!(column, "bmi"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn recode_and_binarize() {
        let schema = CsvSchema::from_toml_str(
            r#"
            target = "y"
            categorical = ["cow"]
            intercept = false
            [sensitive]
            column = "sex"
            positive = ["1"]
            [binarize]
            race = ["1"]
            [recode.cow]
            "1" = "private"
            "2" = "private"
            "*" = "other"
            "#,
        )
        .unwrap();
        let csv = "y,cow,sex,race\n1,1,1,1\n2,2,2,3\n3,5,1,1\n";
        let pool = ingest_reader(csv.as_bytes(), &schema, None).unwrap();
        assert_eq!(pool.columns, vec!["cow=other", "cow=private", "race", "sex"]);
        assert_eq!(pool.dataset.features().row(2), &[1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn schema_rejects_duplicate_roles() {
        let dup = "target = \"a\"\nnumeric = [\"a\"]\n[sensitive]\ncolumn = \"s\"\npositive = [\"1\"]\n";
        assert!(CsvSchema::from_toml_str(dup).is_err());
    }
}
