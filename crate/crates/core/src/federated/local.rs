//! Client-side update rules.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{DefenseConfig, FlConfig};
use super::dataset::ClientDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{grad_batch_indexed, sample_grad_into, ModelParams};

fn check_width(params: &ModelParams, dataset: &ClientDataset) -> Result<()> {
    if params.shape().input_dim() != dataset.dim() {
        return Err(Error::shape(
            format!("{} input features", params.shape().input_dim()),
            dataset.dim(),
        ));
    }
    Ok(())
}

/// E epochs over freshly shuffled mini-batches of size B; the last batch of an
/// epoch may be smaller and is averaged over its actual size.
fn sgd_epochs<R, F>(
    params: &ModelParams,
    dataset: &ClientDataset,
    cfg: &FlConfig,
    rng: &mut R,
    mut batch_grad: F,
) -> Result<ModelParams>
where
    R: Rng + ?Sized,
    F: FnMut(&ModelParams, &[usize]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    check_width(params, dataset)?;
    let mut current = params.clone();
    let mut order: Vec<usize> = Vec::with_capacity(dataset.len());
    for _ in 0..cfg.local_epochs {
        order.clear();
        order.extend(0..dataset.len());
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let g = batch_grad(&current, batch)?;
            for (p, gi) in current.values_mut().iter_mut().zip(&g) {
                *p -= cfg.learning_rate * gi;
            }
        }
        current.ensure_finite()?;
    }
    Ok(current)
}

/// FedAvg local update: `E * ceil(S_c / B)` mini-batch SGD steps.
pub fn local_update_fedavg<R: Rng + ?Sized>(
    params: &ModelParams,
    dataset: &ClientDataset,
    cfg: &FlConfig,
    rng: &mut R,
) -> Result<ModelParams> {
    sgd_epochs(params, dataset, cfg, rng, |p, batch| {
        grad_batch_indexed(p, dataset.features(), dataset.targets(), batch, cfg.loss)
    })
}

/// Rescales `g` in place to norm `min(||g||, clip)`; returns the factor used.
pub fn clip_gradient(g: &mut [f64], clip: f64) -> f64 {
    let n = linalg::norm(g);
    if n > clip {
        let factor = clip / n;
        for v in g.iter_mut() {
            *v *= factor;
        }
        factor
    } else {
        1.0
    }
}

/// DP-SGD batch gradient: `(sum_i clip(g_i) + N(0, noise_std^2 clip^2 I)) / B`.
/// `observe` sees every clipped per-sample gradient.
#[allow(clippy::too_many_arguments)]
pub fn dp_batch_gradient<R: Rng + ?Sized>(
    params: &ModelParams,
    dataset: &ClientDataset,
    batch: &[usize],
    cfg: &FlConfig,
    clip_norm: f64,
    noise_std: f64,
    noise_rng: &mut R,
    observe: &mut dyn FnMut(&[f64]),
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("gradient of an empty batch".into()));
    }
    check_width(params, dataset)?;
    let mut sum = vec![0.0; params.len()];
    let mut scratch = vec![0.0; params.len()];
    for &i in batch {
        if i >= dataset.len() {
            return Err(Error::InvalidArgument(format!("sample index {i} out of range")));
        }
        sample_grad_into(params, dataset.features().row(i), dataset.targets()[i], cfg.loss, &mut scratch);
        clip_gradient(&mut scratch, clip_norm);
        observe(&scratch);
        for (s, g) in sum.iter_mut().zip(&scratch) {
            *s += g;
        }
    }
    if noise_std > 0.0 {
        let scale = noise_std * clip_norm;
        for s in sum.iter_mut() {
            let z: f64 = noise_rng.sample(StandardNormal);
            *s += scale * z;
        }
    }
    let b = batch.len() as f64;
    for s in &mut sum {
        *s /= b;
    }
    Ok(sum)
}

/// DP-SGD local update. Batches are drawn from `batch_rng` exactly as in
/// [`local_update_fedavg`]; Gaussian noise comes from `noise_rng` and is only
/// drawn when `noise_std > 0`.
#[allow(clippy::too_many_arguments)]
pub fn local_update_dpsgd<R1, R2>(
    params: &ModelParams,
    dataset: &ClientDataset,
    cfg: &FlConfig,
    clip_norm: f64,
    noise_std: f64,
    batch_rng: &mut R1,
    noise_rng: &mut R2,
    observe: &mut dyn FnMut(&[f64]),
) -> Result<ModelParams>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    DefenseConfig::DpSgd { clip_norm, noise_std }.validate()?;
    sgd_epochs(params, dataset, cfg, batch_rng, |p, batch| {
        dp_batch_gradient(p, dataset, batch, cfg, clip_norm, noise_std, noise_rng, observe)
    })
}

/// Dispatches on the configured defense.
pub fn local_update<R1, R2>(
    params: &ModelParams,
    dataset: &ClientDataset,
    cfg: &FlConfig,
    defense: &DefenseConfig,
    batch_rng: &mut R1,
    noise_rng: &mut R2,
) -> Result<ModelParams>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    match *defense {
        DefenseConfig::None => local_update_fedavg(params, dataset, cfg, batch_rng),
        DefenseConfig::DpSgd { clip_norm, noise_std } => {
            local_update_dpsgd(params, dataset, cfg, clip_norm, noise_std, batch_rng, noise_rng, &mut |_| {})
        }
    }
}
