//! Recovering a client's optimal local model from what the server sees.
//!
//! The passive attack regresses the broadcast models on the client's
//! pseudo-gradients: for a linear model trained with full-batch gradient
//! descent, `theta_in = A (theta_in - theta_out) + theta*` holds exactly, so
//! the intercept of that regression is `theta*`.

mod active;
mod diagnostics;
mod oracle;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federated::{MessageEntry, MessageLog};
use crate::linalg::{self, PINV_RELATIVE_CUTOFF};
use crate::models::ModelParams;

pub use active::ActiveReconstruction;
pub use diagnostics::{
    error_scale_estimate, gradient_noise_sigma, lemma1_eigenvalues, thm1_diagnostics, ErrorScaleInputs,
    SpectralDiagnostics,
};
pub use oracle::{adam_full_batch, oracle_local_model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub estimate: ModelParams,
    /// Distance to the oracle optimum, once one is attached.
    pub l2_error: Option<f64>,
    /// Number of messages used.
    pub n_c: usize,
    /// Smallest eigenvalue of `Theta_out^T Theta_out / n_c` (passive only).
    pub lambda_min: Option<f64>,
    /// Two-norm condition number of `Theta_out` (passive only).
    pub condition: Option<f64>,
    pub rank_deficient: bool,
}

impl ReconstructionReport {
    pub fn with_oracle(mut self, oracle: &ModelParams) -> Result<Self> {
        self.l2_error = Some(self.estimate.distance(oracle)?);
        Ok(self)
    }
}

/// `[theta_in - theta_out, 1]` for each entry.
pub(crate) fn theta_out(entries: &[&MessageEntry]) -> DMatrix<f64> {
    let d = entries.first().map_or(0, |e| e.sent.len());
    DMatrix::from_fn(entries.len(), d + 1, |i, j| {
        if j == d {
            1.0
        } else {
            entries[i].sent.values()[j] - entries[i].received.values()[j]
        }
    })
}

fn check_linear(entries: &[&MessageEntry]) -> Result<()> {
    let first = entries
        .first()
        .ok_or_else(|| Error::InvalidArgument("reconstruction needs at least one message".into()))?;
    if !first.sent.shape().is_linear() {
        return Err(Error::InvalidArgument("passive reconstruction applies to linear models".into()));
    }
    Ok(())
}

/// Passive reconstruction from the messages of `rounds`.
pub fn passive_reconstruct_linear(log: &MessageLog, rounds: &[usize]) -> Result<ReconstructionReport> {
    let entries = log.select(rounds)?;
    reconstruct_from_entries(&entries)
}

pub fn reconstruct_from_entries(entries: &[&MessageEntry]) -> Result<ReconstructionReport> {
    check_linear(entries)?;
    let n = entries.len();
    let d = entries[0].sent.len();
    let t_in = DMatrix::from_fn(n, d, |i, j| entries[i].sent.values()[j]);
    let t_out = theta_out(entries);
    let sol = linalg::min_norm_solve(&t_out, &t_in, PINV_RELATIVE_CUTOFF)?;
    let estimate: Vec<f64> = (0..d).map(|j| sol.solution[(d, j)]).collect();
    let spectral = diagnostics::spectral(&t_out);
    Ok(ReconstructionReport {
        estimate: ModelParams::linear(estimate)?,
        l2_error: None,
        n_c: n,
        lambda_min: Some(spectral.lambda_min),
        condition: Some(spectral.condition),
        rank_deficient: sol.rank < d + 1,
    })
}

/// `n_select` rounds spaced `floor(len / n_select)` apart from the start of
/// the log.
pub fn evenly_spaced_rounds(log: &MessageLog, n_select: usize) -> Result<Vec<usize>> {
    if n_select == 0 || n_select > log.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {n_select} rounds from a log of {}",
            log.len()
        )));
    }
    let gap = log.len() / n_select;
    Ok((0..n_select).map(|i| log.entries()[i * gap].round).collect())
}

/// Among `n_trials` random subsets of size `n_select`, the one whose
/// `Theta_out` has the smallest condition number; the first wins ties.
pub fn select_message_rounds<R: Rng + ?Sized>(
    log: &MessageLog,
    n_select: usize,
    n_trials: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if n_select == 0 || n_select > log.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {n_select} rounds from a log of {}",
            log.len()
        )));
    }
    if n_select == log.len() {
        return Ok(log.inspected_rounds());
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..n_trials {
        let mut idx = index::sample(rng, log.len(), n_select).into_vec();
        idx.sort_unstable();
        let entries: Vec<&MessageEntry> = idx.iter().map(|&i| &log.entries()[i]).collect();
        let cond = linalg::condition_number(&theta_out(&entries));
        if best.as_ref().is_none_or(|(c, _)| cond < *c) {
            best = Some((cond, idx));
        }
    }
    let (_, idx) = best.expect("at least one trial");
    Ok(idx.into_iter().map(|i| log.entries()[i].round).collect())
}
