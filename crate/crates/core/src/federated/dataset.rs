use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aia::PublicView;
use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

/// One client's local data. The sensitive attribute, when present, is a
/// binary column of the design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientDataset {
    features: RowMatrix,
    targets: Vec<f64>,
    sensitive_col: Option<usize>,
}

impl ClientDataset {
    pub fn new(features: RowMatrix, targets: Vec<f64>, sensitive_col: Option<usize>) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::shape(format!("{} targets", features.rows()), targets.len()));
        }
        if features.rows() == 0 {
            return Err(Error::Data("a client dataset needs at least one sample".into()));
        }
        if !features.is_finite() || targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Data("dataset contains NaN or infinite values".into()));
        }
        if let Some(col) = sensitive_col {
            if col >= features.cols() {
                return Err(Error::Data(format!(
                    "sensitive column {col} out of range for {} features",
                    features.cols()
                )));
            }
            if let Some(i) = (0..features.rows()).find(|&i| {
                let v = features.get(i, col);
                v != 0.0 && v != 1.0
            }) {
                return Err(Error::Data(format!(
                    "sensitive value {} at row {i} is not binary",
                    features.get(i, col)
                )));
            }
        }
        Ok(Self {
            features,
            targets,
            sensitive_col,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &RowMatrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn sensitive_col(&self) -> Option<usize> {
        self.sensitive_col
    }

    pub fn public_cols(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| Some(j) != self.sensitive_col).collect()
    }

    pub fn sensitive_values(&self) -> Result<Vec<u8>> {
        let col = self
            .sensitive_col
            .ok_or_else(|| Error::Data("dataset has no sensitive attribute".into()))?;
        Ok((0..self.len()).map(|i| self.features.get(i, col) as u8).collect())
    }

    /// What the adversary sees (public columns and targets), together with
    /// the ground truth used to score attacks.
    pub fn public_view(&self) -> Result<PublicView> {
        let col = self
            .sensitive_col
            .ok_or_else(|| Error::Data("dataset has no sensitive attribute".into()))?;
        PublicView::new(
            self.features.without_column(col),
            self.targets.clone(),
            col,
            self.sensitive_values()?,
        )
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!("row {bad} out of range")));
        }
        Self::new(
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.targets[i]).collect(),
            self.sensitive_col,
        )
    }

    /// Shuffled split keeping `ceil(train_fraction * S)` rows for training
    /// (at least one).
    pub fn train_validation_split<R: Rng + ?Sized>(
        &self,
        train_fraction: f64,
        rng: &mut R,
    ) -> Result<(Self, Option<Self>)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::Config(format!("train fraction {train_fraction} not in [0, 1]")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        let n_train = ((train_fraction * self.len() as f64).ceil() as usize).clamp(1, self.len());
        let train = self.select(&idx[..n_train])?;
        let validation = if n_train < self.len() {
            Some(self.select(&idx[n_train..])?)
        } else {
            None
        };
        Ok((train, validation))
    }

    /// Stacks datasets with identical layout.
    pub fn concat(parts: &[&ClientDataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut data = Vec::new();
        let mut targets = Vec::new();
        for p in parts {
            if p.dim() != first.dim() || p.sensitive_col != first.sensitive_col {
                return Err(Error::shape(first.dim(), p.dim()));
            }
            data.extend_from_slice(p.features.as_slice());
            targets.extend_from_slice(&p.targets);
        }
        Self::new(
            RowMatrix::new(targets.len(), first.dim(), data)?,
            targets,
            first.sensitive_col,
        )
    }
}
