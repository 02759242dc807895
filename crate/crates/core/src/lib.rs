//! Federated regression workbench: FedAvg simulation with message taps,
//! optimal local model reconstruction (passive least squares and active Adam
//! emulation) and attribute inference attacks on the reconstructed models.
//!
//! Module map:
//! - [`models`]: linear and one-hidden-layer MLP regressors, exact gradients,
//!   SGD/Adam, least squares.
//! - [`federated`]: client datasets, FedAvg and DP-SGD local updates, the
//!   server loop with wiretaps and adversary hooks, message logs.
//! - [`reconstruction`]: passive and active local-model reconstruction,
//!   message-set selection, oracle local models, spectral diagnostics.
//! - [`aia`]: model-based and gradient-based attribute inference.
//! - [`data`]: synthetic generators, heterogeneous splitting, CSV ingestion.
//! - [`experiments`]: orchestration, sweeps and reports.

pub mod aia;
pub mod data;
pub mod error;
pub mod experiments;
pub mod federated;
pub mod linalg;
pub mod models;
pub mod numfmt;
pub mod reconstruction;
pub mod rng;

pub use error::{Error, Result};
