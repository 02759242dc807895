//! Attribute inference: recovering a binary sensitive column from public
//! features, labels and either a model (model-based) or eavesdropped updates
//! (gradient-based).

mod gumbel;
mod model_based;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

pub use gumbel::{
    gradient_based_aia, gumbel_candidates, run_gumbel, select_candidate, GumbelAiaConfig, GumbelRun,
    SelectionCriterion,
};
pub use model_based::{
    closed_form_scores, model_based_aia, model_based_aia_linear_closed_form, prop1_bound,
    threshold, AccuracyBound,
};

/// The adversary's view of one client: every column except the sensitive
/// one, the targets, and the ground truth used only for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicView {
    public: RowMatrix,
    targets: Vec<f64>,
    sensitive_col: usize,
    truth: Vec<u8>,
}

impl PublicView {
    pub fn new(public: RowMatrix, targets: Vec<f64>, sensitive_col: usize, truth: Vec<u8>) -> Result<Self> {
        if public.rows() != targets.len() || truth.len() != targets.len() {
            return Err(Error::shape(
                format!("{} targets and labels", public.rows()),
                format!("{} targets, {} labels", targets.len(), truth.len()),
            ));
        }
        if sensitive_col > public.cols() {
            return Err(Error::InvalidArgument(format!(
                "sensitive column {sensitive_col} out of range for {} public columns",
                public.cols()
            )));
        }
        if truth.iter().any(|&s| s > 1) {
            return Err(Error::Data("ground-truth attribute must be 0 or 1".into()));
        }
        Ok(Self { public, targets, sensitive_col, truth })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn public(&self) -> &RowMatrix {
        &self.public
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn sensitive_col(&self) -> usize {
        self.sensitive_col
    }

    pub fn truth(&self) -> &[u8] {
        &self.truth
    }

    /// Width of the model input, public columns plus the sensitive one.
    pub fn full_dim(&self) -> usize {
        self.public.cols() + 1
    }

    /// Sample `i` with the sensitive slot set to `s`.
    pub fn full_input(&self, i: usize, s: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.full_dim());
        write_full_input(self.public.row(i), self.sensitive_col, s, &mut x);
        x
    }

    pub fn accuracy(&self, predictions: &[u8]) -> Result<f64> {
        accuracy(predictions, &self.truth)
    }
}

pub(crate) fn write_full_input(public: &[f64], col: usize, s: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(&public[..col]);
    out.push(s);
    out.extend_from_slice(&public[col..]);
}

/// `1 - Hamming(pred, truth) / n`.
pub fn accuracy(predictions: &[u8], truth: &[u8]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::shape(truth.len(), predictions.len()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty prediction".into()));
    }
    let correct = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub method: String,
    pub predictions: Vec<u8>,
    pub accuracy: f64,
    #[serde(default)]
    pub aux: BTreeMap<String, f64>,
}

impl AttackOutcome {
    pub fn new(method: impl Into<String>, predictions: Vec<u8>, view: &PublicView) -> Result<Self> {
        let accuracy = view.accuracy(&predictions)?;
        Ok(Self {
            method: method.into(),
            predictions,
            accuracy,
            aux: BTreeMap::new(),
        })
    }

    pub fn with_aux(mut self, key: &str, value: f64) -> Self {
        self.aux.insert(key.to_string(), value);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_input_reinserts_the_column() {
        let p = RowMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let v = PublicView::new(p, vec![0.0, 0.0], 1, vec![0, 1]).unwrap();
        assert_eq!(v.full_input(1, 0.25), vec![3.0, 0.25, 4.0]);
        let end = PublicView::new(v.public().clone(), vec![0.0, 0.0], 2, vec![0, 1]).unwrap();
        assert_eq!(end.full_input(0, 1.0), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn accuracy_is_one_minus_hamming() {
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.5);
        assert!(accuracy(&[1], &[1, 0]).is_err());
    }
}
