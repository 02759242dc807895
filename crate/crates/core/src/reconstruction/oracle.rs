use crate::error::{Error, Result};
use crate::federated::ClientDataset;
use crate::models::{grad_batch_indexed, mean_loss, solve_least_squares, Adam, AdamConfig, LossKind, ModelParams};

/// Full-batch Adam for `iterations` steps from `start`; returns the iterate
/// with the lowest training loss and that loss.
pub fn adam_full_batch(
    dataset: &ClientDataset,
    start: &ModelParams,
    iterations: usize,
    adam: &AdamConfig,
) -> Result<(ModelParams, f64)> {
    let loss = LossKind::SquaredError;
    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut opt = Adam::new(*adam, start.len())?;
    let mut current = start.clone();
    let mut best = (current.clone(), mean_loss(&current, dataset.features(), dataset.targets(), loss)?);
    for _ in 0..iterations {
        let g = grad_batch_indexed(&current, dataset.features(), dataset.targets(), &all, loss)?;
        opt.step(current.values_mut(), &g)?;
        let l = mean_loss(&current, dataset.features(), dataset.targets(), loss)?;
        if !l.is_finite() {
            return Err(Error::Numeric("oracle training diverged".into()));
        }
        if l < best.1 {
            best = (current.clone(), l);
        }
    }
    Ok(best)
}

/// The client's optimal local model. Exact least squares for linear models
/// (`budget` is ignored); full-batch Adam from `start` otherwise.
pub fn oracle_local_model(
    dataset: &ClientDataset,
    start: &ModelParams,
    budget: usize,
    adam: &AdamConfig,
) -> Result<ModelParams> {
    if start.shape().input_dim() != dataset.dim() {
        return Err(Error::shape(format!("{} input features", start.shape().input_dim()), dataset.dim()));
    }
    if start.shape().is_linear() {
        return solve_least_squares(dataset.features(), dataset.targets());
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("the oracle needs a positive iteration budget".into()));
    }
    Ok(adam_full_batch(dataset, start, budget, adam)?.0)
}
