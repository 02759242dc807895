use serde::{Deserialize, Serialize};

use super::{write_full_input, AttackOutcome, PublicView};
use crate::error::{Error, Result};
use crate::federated::ClientDataset;
use crate::models::{mean_loss, sample_loss, LossKind, ModelParams};

fn check_width(params: &ModelParams, view: &PublicView) -> Result<()> {
    if params.shape().input_dim() != view.full_dim() {
        return Err(Error::shape(
            format!("{} input features", params.shape().input_dim()),
            view.full_dim(),
        ));
    }
    Ok(())
}

/// Per sample, the value of the sensitive attribute that minimizes the loss
/// of `params`; equal losses resolve to 1.
pub fn model_based_aia(params: &ModelParams, view: &PublicView) -> Result<AttackOutcome> {
    check_width(params, view)?;
    let col = view.sensitive_col();
    let mut x = Vec::with_capacity(view.full_dim());
    let mut predictions = Vec::with_capacity(view.len());
    for (i, &y) in view.targets().iter().enumerate() {
        write_full_input(view.public().row(i), col, 0.0, &mut x);
        let l0 = sample_loss(params, &x, y, LossKind::SquaredError)?;
        x[col] = 1.0;
        let l1 = sample_loss(params, &x, y, LossKind::SquaredError)?;
        predictions.push(u8::from(l1 <= l0));
    }
    AttackOutcome::new("model-based", predictions, view)
}

/// The relaxed attribute `(y - P theta_public) / theta_s` for every sample.
pub fn closed_form_scores(params: &ModelParams, view: &PublicView) -> Result<Vec<f64>> {
    if !params.shape().is_linear() {
        return Err(Error::InvalidArgument("the closed form applies to linear models only".into()));
    }
    check_width(params, view)?;
    let col = view.sensitive_col();
    let theta = params.values();
    let theta_s = theta[col];
    if theta_s == 0.0 {
        return Err(Error::DegenerateAttribute { column: col });
    }
    let public_theta: Vec<f64> = theta[..col].iter().chain(&theta[col + 1..]).copied().collect();
    Ok(view
        .targets()
        .iter()
        .enumerate()
        .map(|(i, y)| (y - crate::linalg::dot(view.public().row(i), &public_theta)) / theta_s)
        .collect())
}

/// 0 below one half, 1 otherwise.
pub fn threshold(score: f64) -> u8 {
    u8::from(score >= 0.5)
}

/// Linear model-based attack in two steps: solve for the relaxed attribute,
/// then threshold it at one half.
pub fn model_based_aia_linear_closed_form(params: &ModelParams, view: &PublicView) -> Result<AttackOutcome> {
    let predictions = closed_form_scores(params, view)?.into_iter().map(threshold).collect();
    AttackOutcome::new("closed-form", predictions, view)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBound {
    /// `max(0, 1 - 4 E_c / theta_s^2)`
    pub value: f64,
    /// Mean squared residual of the model on the full local data.
    pub mse: f64,
    /// Set when `theta_s = 0`; the bound is then reported as 0.
    pub degenerate: bool,
}

/// Guaranteed accuracy of the closed-form attack for a linear model with
/// mean squared error `E_c` on the client's data.
pub fn prop1_bound(params: &ModelParams, dataset: &ClientDataset) -> Result<AccuracyBound> {
    if !params.shape().is_linear() {
        return Err(Error::InvalidArgument("the accuracy bound applies to linear models only".into()));
    }
    let col = dataset
        .sensitive_col()
        .ok_or_else(|| Error::Data("dataset has no sensitive attribute".into()))?;
    let mse = mean_loss(params, dataset.features(), dataset.targets(), LossKind::SquaredError)?;
    let theta_s = params.values()[col];
    if theta_s == 0.0 {
        return Ok(AccuracyBound { value: 0.0, mse, degenerate: true });
    }
    Ok(AccuracyBound {
        value: (1.0 - 4.0 * mse / (theta_s * theta_s)).max(0.0),
        mse,
        degenerate: false,
    })
}
