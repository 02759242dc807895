use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelShape {
    Linear { dim: usize },
    /// `input -> hidden (ReLU) -> 1`, identity output.
    Mlp { input: usize, hidden: usize },
}

impl ModelShape {
    pub fn num_params(&self) -> usize {
        match *self {
            ModelShape::Linear { dim } => dim,
            ModelShape::Mlp { input, hidden } => input * hidden + hidden + hidden + 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            ModelShape::Linear { dim } => dim,
            ModelShape::Mlp { input, .. } => input,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ModelShape::Linear { .. })
    }
}

impl std::fmt::Display for ModelShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelShape::Linear { dim } => write!(f, "linear({dim})"),
            ModelShape::Mlp { input, hidden } => write!(f, "mlp({input}-{hidden}-1)"),
        }
    }
}

/// Flat parameter vector plus its layout.
///
/// MLP layout: `W1` (hidden x input, row-major), `b1` (hidden), `w2`
/// (hidden), `b2` (1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    shape: ModelShape,
    values: Vec<f64>,
}

/// Unflattened MLP weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayers {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ModelParams {
    pub fn new(shape: ModelShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.num_params() {
            return Err(Error::shape(
                format!("{} parameters for {shape}", shape.num_params()),
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(Self { shape, values })
    }

    pub fn linear(values: Vec<f64>) -> Result<Self> {
        Self::new(ModelShape::Linear { dim: values.len() }, values)
    }

    pub fn zeros(shape: ModelShape) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.num_params()],
        }
    }

    /// Linear models start at zero; MLP weights are uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng + ?Sized>(shape: ModelShape, rng: &mut R) -> Self {
        match shape {
            ModelShape::Linear { .. } => Self::zeros(shape),
            ModelShape::Mlp { input, hidden } => {
                let first = 1.0 / (input as f64).sqrt();
                let second = 1.0 / (hidden as f64).sqrt();
                let mut values = Vec::with_capacity(shape.num_params());
                for _ in 0..input * hidden + hidden {
                    values.push(rng.random_range(-first..=first));
                }
                for _ in 0..hidden + 1 {
                    values.push(rng.random_range(-second..=second));
                }
                Self { shape, values }
            }
        }
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replaces the values, keeping the shape; rejects non-finite entries.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.shape, values)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn ensure_same_shape(&self, other: &ModelParams) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(self.shape, other.shape));
        }
        Ok(())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Numeric(format!("parameter {i} diverged"))),
            None => Ok(()),
        }
    }

    /// `self - other`, element-wise.
    pub fn difference(&self, other: &ModelParams) -> Result<Vec<f64>> {
        self.ensure_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect())
    }

    pub fn distance(&self, other: &ModelParams) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(linalg::distance(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.values)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v * factor).collect())
    }

    pub(crate) fn mlp_slices(&self) -> Option<(&[f64], &[f64], &[f64], f64)> {
        match self.shape {
            ModelShape::Mlp { input, hidden } => {
                let (w1, rest) = self.values.split_at(input * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, rest) = rest.split_at(hidden);
                Some((w1, b1, w2, rest[0]))
            }
            ModelShape::Linear { .. } => None,
        }
    }

    pub fn to_layers(&self) -> Option<MlpLayers> {
        let ModelShape::Mlp { input, .. } = self.shape else {
            return None;
        };
        let (w1, b1, w2, b2) = self.mlp_slices()?;
        Some(MlpLayers {
            w1: w1.chunks(input).map(<[f64]>::to_vec).collect(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2,
        })
    }

    pub fn from_layers(layers: &MlpLayers) -> Result<Self> {
        let hidden = layers.b1.len();
        let input = layers.w1.first().map_or(0, Vec::len);
        if layers.w1.len() != hidden || layers.w2.len() != hidden {
            return Err(Error::shape(
                format!("{hidden} hidden units in every layer"),
                format!("w1 rows {}, w2 {}", layers.w1.len(), layers.w2.len()),
            ));
        }
        let mut values = Vec::with_capacity(input * hidden + 2 * hidden + 1);
        for row in &layers.w1 {
            if row.len() != input {
                return Err(Error::shape(input, row.len()));
            }
            values.extend_from_slice(row);
        }
        values.extend_from_slice(&layers.b1);
        values.extend_from_slice(&layers.w2);
        values.push(layers.b2);
        Self::new(ModelShape::Mlp { input, hidden }, values)
    }
}
