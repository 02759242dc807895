use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::federated::ClientDataset;
use crate::linalg::RowMatrix;
use crate::numfmt;

/// An encoded dataset before it is split among clients, with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub dataset: ClientDataset,
    pub columns: Vec<String>,
}

#[derive(Deserialize)]
struct Header {
    columns: Vec<String>,
    sensitive_col: Option<usize>,
}

#[derive(Deserialize)]
struct Row {
    features: Vec<f64>,
    target: f64,
}

impl Pool {
    pub fn new(dataset: ClientDataset, columns: Vec<String>) -> Result<Self> {
        if columns.len() != dataset.dim() {
            return Err(Error::shape(format!("{} column names", dataset.dim()), columns.len()));
        }
        Ok(Self { dataset, columns })
    }

    /// JSON lines: a header with column names and the sensitive column, then
    /// one `{"features": [...], "target": v}` per row, floats at 17
    /// significant digits.
    pub fn to_jsonl(&self) -> String {
        let header = serde_json::json!({
            "columns": self.columns,
            "sensitive_col": self.dataset.sensitive_col(),
        });
        let mut out = format!("{header}\n");
        for (row, y) in self.dataset.features().iter_rows().zip(self.dataset.targets()) {
            out.push_str("{\"features\":");
            numfmt::push_json_array(&mut out, row);
            let _ = writeln!(out, ",\"target\":{}}}", numfmt::f64_17(*y));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<memory>"))
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Format { path: path.to_path_buf(), line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| err(1, "empty pool file".into()))?;
        let header: Header = serde_json::from_str(first).map_err(|e| err(1, e.to_string()))?;
        let width = header.columns.len();
        let mut data = Vec::new();
        let mut targets = Vec::new();
        for (i, line) in lines {
            let row: Row = serde_json::from_str(line).map_err(|e| err(i + 1, e.to_string()))?;
            if row.features.len() != width {
                return Err(err(i + 1, format!("expected {width} features, found {}", row.features.len())));
            }
            data.extend(row.features);
            targets.push(row.target);
        }
        let x = RowMatrix::new(targets.len(), width, data)?;
        Self::new(ClientDataset::new(x, targets, header.sensitive_col)?, header.columns)
    }
}
