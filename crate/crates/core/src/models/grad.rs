use serde::{Deserialize, Serialize};

use super::params::{ModelParams, ModelShape};
use crate::error::{Error, Result};
use crate::linalg::{self, RowMatrix};

/// Per-sample loss. The local objective is the mean over samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(f(x) - y)^2`
    #[default]
    SquaredError,
}

impl LossKind {
    fn value(self, prediction: f64, target: f64) -> f64 {
        match self {
            LossKind::SquaredError => {
                let r = prediction - target;
                r * r
            }
        }
    }

    /// d loss / d prediction
    fn derivative(self, prediction: f64, target: f64) -> f64 {
        match self {
            LossKind::SquaredError => 2.0 * (prediction - target),
        }
    }
}

fn check_input(shape: ModelShape, x: &[f64]) -> Result<()> {
    if x.len() != shape.input_dim() {
        return Err(Error::shape(
            format!("input of width {} for {shape}", shape.input_dim()),
            x.len(),
        ));
    }
    Ok(())
}

fn forward_unchecked(params: &ModelParams, x: &[f64]) -> f64 {
    match params.mlp_slices() {
        None => linalg::dot(params.values(), x),
        Some((w1, b1, w2, b2)) => {
            let input = x.len();
            let mut out = b2;
            for (j, (&bias, &w_out)) in b1.iter().zip(w2).enumerate() {
                let z = linalg::dot(&w1[j * input..(j + 1) * input], x) + bias;
                if z > 0.0 {
                    out += w_out * z;
                }
            }
            out
        }
    }
}

pub fn predict(params: &ModelParams, x: &[f64]) -> Result<f64> {
    check_input(params.shape(), x)?;
    Ok(forward_unchecked(params, x))
}

pub fn sample_loss(params: &ModelParams, x: &[f64], y: f64, loss: LossKind) -> Result<f64> {
    Ok(loss.value(predict(params, x)?, y))
}

/// Mean loss over all rows of `x`.
pub fn mean_loss(params: &ModelParams, x: &RowMatrix, y: &[f64], loss: LossKind) -> Result<f64> {
    if x.rows() != y.len() {
        return Err(Error::shape(format!("{} targets", x.rows()), y.len()));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("loss over an empty dataset".into()));
    }
    check_input(params.shape(), x.row(0))?;
    let total: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, &t)| loss.value(forward_unchecked(params, row), t))
        .sum();
    Ok(total / x.rows() as f64)
}

/// Writes the gradient of the per-sample loss into `out` (overwritten).
/// ReLU has derivative 0 at 0.
pub(crate) fn sample_grad_into(params: &ModelParams, x: &[f64], y: f64, loss: LossKind, out: &mut [f64]) {
    match params.mlp_slices() {
        None => {
            let dl = loss.derivative(linalg::dot(params.values(), x), y);
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = dl * xi;
            }
        }
        Some((w1, b1, w2, b2)) => {
            let input = x.len();
            let hidden = b1.len();
            let mut pre = vec![0.0; hidden];
            let mut f = b2;
            for j in 0..hidden {
                let z = linalg::dot(&w1[j * input..(j + 1) * input], x) + b1[j];
                pre[j] = z;
                if z > 0.0 {
                    f += w2[j] * z;
                }
            }
            let dl = loss.derivative(f, y);
            let (g_w1, rest) = out.split_at_mut(input * hidden);
            let (g_b1, rest) = rest.split_at_mut(hidden);
            let (g_w2, g_b2) = rest.split_at_mut(hidden);
            g_b2[0] = dl;
            for j in 0..hidden {
                let active = pre[j] > 0.0;
                g_w2[j] = if active { dl * pre[j] } else { 0.0 };
                let delta = if active { dl * w2[j] } else { 0.0 };
                g_b1[j] = delta;
                for (g, &xk) in g_w1[j * input..(j + 1) * input].iter_mut().zip(x) {
                    *g = delta * xk;
                }
            }
        }
    }
}

pub fn per_sample_grad(params: &ModelParams, x: &[f64], y: f64, loss: LossKind) -> Result<Vec<f64>> {
    check_input(params.shape(), x)?;
    let mut out = vec![0.0; params.len()];
    sample_grad_into(params, x, y, loss, &mut out);
    Ok(out)
}

/// Mean of per-sample gradients over `batch`.
///
/// The per-sample gradients are summed in iteration order and the sum is
/// divided by the batch size; DP-SGD uses the same reduction so that a
/// disabled defense reproduces this bit for bit.
pub fn grad_batch<'a, I>(params: &ModelParams, batch: I, loss: LossKind) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut sum = vec![0.0; params.len()];
    let mut scratch = vec![0.0; params.len()];
    let mut count = 0usize;
    for (x, y) in batch {
        check_input(params.shape(), x)?;
        sample_grad_into(params, x, y, loss, &mut scratch);
        for (s, g) in sum.iter_mut().zip(&scratch) {
            *s += g;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("gradient of an empty batch".into()));
    }
    let b = count as f64;
    for s in &mut sum {
        *s /= b;
    }
    Ok(sum)
}

pub fn grad_batch_indexed(
    params: &ModelParams,
    x: &RowMatrix,
    y: &[f64],
    idx: &[usize],
    loss: LossKind,
) -> Result<Vec<f64>> {
    if x.rows() != y.len() {
        return Err(Error::shape(format!("{} targets", x.rows()), y.len()));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
        return Err(Error::InvalidArgument(format!(
            "sample index {bad} out of range for {} rows",
            x.rows()
        )));
    }
    grad_batch(params, idx.iter().map(|&i| (x.row(i), y[i])), loss)
}
