//! Regression models, exact gradients and the optimizers shared by clients
//! and adversaries.
//!
//! Parameters are always a flat `Vec<f64>`; [`ModelShape`] fixes the layout.
//! All reductions over samples are sequential sums in sample order, so a
//! fixed seed gives bit-identical results.

mod grad;
mod lstsq;
mod optim;
mod params;

pub use grad::{
    grad_batch, grad_batch_indexed, mean_loss, per_sample_grad, predict, sample_loss,
    LossKind,
};
pub(crate) use grad::sample_grad_into;
pub use lstsq::solve_least_squares;
pub use optim::{Adam, AdamConfig, OptimizerState};
pub use params::{MlpLayers, ModelParams, ModelShape};
