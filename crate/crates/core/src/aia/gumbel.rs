//! Gradient-based attribute inference with a Gumbel-softmax relaxation.
//!
//! Each sample carries two logits. An iteration draws relaxed attributes
//! `s_i = softmax((l_i + g_i) / tau)[1]`, forms the summed per-sample model
//! gradients at every inspected broadcast, and ascends the total cosine
//! similarity between those gradients and the observed pseudo-gradients.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{write_full_input, AttackOutcome, PublicView};
use crate::error::{Error, Result};
use crate::federated::{MessageEntry, MessageLog};
use crate::linalg::{self, RowMatrix};
use crate::models::{per_sample_grad, LossKind, ModelParams};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    /// Keep the candidate whose hard prediction has the highest mean cosine
    /// similarity ("Grad").
    #[default]
    HighestCosSim,
    /// Keep the candidate with the best accuracy against the ground truth
    /// ("Grad-w-O").
    OracleAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GumbelAiaConfig {
    pub temperature: f64,
    pub learning_rates: Vec<f64>,
    pub iterations: usize,
    /// Candidate round subsets: the first `max(1, floor(f * |rounds|))`.
    pub fractions: Vec<f64>,
    pub criterion: SelectionCriterion,
    /// Central-difference step for the MLP attribute derivative.
    pub fd_step: f64,
}

impl Default for GumbelAiaConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            learning_rates: vec![1e2, 1e3, 1e4, 1e5, 1e6],
            iterations: 500,
            fractions: vec![0.01, 0.05, 0.1, 0.2, 0.5, 1.0],
            criterion: SelectionCriterion::HighestCosSim,
            fd_step: 1e-4,
        }
    }
}

impl GumbelAiaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("the Gumbel attack needs at least one iteration".into()));
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|lr| !(*lr >= 0.0 && lr.is_finite())) {
            return Err(Error::Config("learning-rate grid must be non-empty, finite and non-negative".into()));
        }
        if self.fractions.is_empty() || self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::Config("round fractions must be non-empty and lie in (0, 1]".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Config("finite-difference step must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one optimization run on a fixed round subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelRun {
    pub predictions: Vec<u8>,
    pub accuracy: f64,
    /// Mean cosine similarity over rounds at the hard prediction.
    pub objective: f64,
    /// Same quantity at the uniform starting point `s = 1/2`.
    pub initial_objective: f64,
    pub rounds: usize,
    pub learning_rate: f64,
}

struct Target {
    sent: ModelParams,
    delta: Vec<f64>,
    delta_norm: f64,
}

/// `cos(g, delta)` and its gradient with respect to `g`; both zero when
/// either vector vanishes.
fn cosine_and_grad(g: &[f64], delta: &[f64], delta_norm: f64) -> (f64, Vec<f64>) {
    let gn = linalg::norm(g);
    if gn == 0.0 || delta_norm == 0.0 {
        return (0.0, vec![0.0; g.len()]);
    }
    let cos = linalg::dot(g, delta) / (gn * delta_norm);
    let w = g
        .iter()
        .zip(delta)
        .map(|(gi, di)| di / (gn * delta_norm) - cos * gi / (gn * gn))
        .collect();
    (cos, w)
}

/// Objective `sum_t cos(sum_i grad l(theta_t; x_i(s_i), y_i), delta_t)` and
/// its derivative in every `s_i`.
struct Objective<'a> {
    view: &'a PublicView,
    targets: Vec<Target>,
    linear: Option<LinearCache>,
    fd_step: f64,
}

/// Sufficient statistics that make the linear objective `O(S d + T d)`.
struct LinearCache {
    /// Rows are samples with the sensitive slot zeroed.
    inputs: RowMatrix,
    /// `P^T (P theta_t - y)` per round.
    base: Vec<Vec<f64>>,
}

impl<'a> Objective<'a> {
    fn new(entries: &[&MessageEntry], view: &'a PublicView, fd_step: f64) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidArgument("gradient-based attack needs at least one round".into()))?;
        let shape = first.sent.shape();
        if shape.input_dim() != view.full_dim() {
            return Err(Error::shape(format!("{} input features", shape.input_dim()), view.full_dim()));
        }
        let targets: Vec<Target> = entries
            .iter()
            .map(|e| {
                first.sent.ensure_same_shape(&e.sent)?;
                let delta = e.pseudo_gradient();
                Ok(Target {
                    delta_norm: linalg::norm(&delta),
                    delta,
                    sent: e.sent.clone(),
                })
            })
            .collect::<Result<_>>()?;
        let linear = shape.is_linear().then(|| {
            let d = view.full_dim();
            let mut data = Vec::with_capacity(view.len() * d);
            let mut x = Vec::with_capacity(d);
            for i in 0..view.len() {
                write_full_input(view.public().row(i), view.sensitive_col(), 0.0, &mut x);
                data.extend_from_slice(&x);
            }
            let inputs = RowMatrix::new(view.len(), d, data).expect("consistent dimensions");
            let base = targets
                .iter()
                .map(|t| {
                    let mut b = vec![0.0; d];
                    for (row, y) in inputs.iter_rows().zip(view.targets()) {
                        let r = linalg::dot(row, t.sent.values()) - y;
                        for (bj, xj) in b.iter_mut().zip(row) {
                            *bj += r * xj;
                        }
                    }
                    b
                })
                .collect();
            LinearCache { inputs, base }
        });
        Ok(Self { view, targets, linear, fd_step })
    }

    fn evaluate(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        match &self.linear {
            Some(cache) => Ok(self.evaluate_linear(cache, s)),
            None => self.evaluate_generic(s),
        }
    }

    fn evaluate_linear(&self, cache: &LinearCache, s: &[f64]) -> (f64, Vec<f64>) {
        let k = self.view.sensitive_col();
        let d = cache.inputs.cols();
        let mut v = vec![0.0; d];
        let mut q = 0.0;
        let mut ys = 0.0;
        for ((row, &si), y) in cache.inputs.iter_rows().zip(s).zip(self.view.targets()) {
            for (vj, xj) in v.iter_mut().zip(row) {
                *vj += si * xj;
            }
            q += si * si;
            ys += y * si;
        }
        let mut total = 0.0;
        let mut uv = vec![0.0; d];
        let mut alpha = 0.0;
        let mut beta = 0.0;
        for (t, base) in self.targets.iter().zip(&cache.base) {
            let theta = t.sent.values();
            let tk = theta[k];
            let mut g: Vec<f64> = base.iter().zip(&v).map(|(b, vj)| 2.0 * b + 2.0 * tk * vj).collect();
            g[k] += 2.0 * (linalg::dot(theta, &v) - ys + tk * q);
            let (cos, w) = cosine_and_grad(&g, &t.delta, t.delta_norm);
            total += cos;
            let wk = w[k];
            for ((u, wj), thj) in uv.iter_mut().zip(&w).zip(theta) {
                *u += tk * wj + wk * thj;
            }
            alpha += tk * wk;
            beta += wk;
        }
        let grad = cache
            .inputs
            .iter_rows()
            .zip(s)
            .zip(self.view.targets())
            .map(|((row, si), y)| 2.0 * linalg::dot(row, &uv) + 4.0 * si * alpha - 2.0 * y * beta)
            .collect();
        (total, grad)
    }

    fn evaluate_generic(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        let view = self.view;
        let k = view.sensitive_col();
        let loss = LossKind::SquaredError;
        let h = self.fd_step;
        let mut total = 0.0;
        let mut grad = vec![0.0; view.len()];
        for t in &self.targets {
            let mut g = vec![0.0; t.sent.len()];
            for (i, &si) in s.iter().enumerate() {
                let gi = per_sample_grad(&t.sent, &view.full_input(i, si), view.targets()[i], loss)?;
                for (a, b) in g.iter_mut().zip(&gi) {
                    *a += b;
                }
            }
            let (cos, w) = cosine_and_grad(&g, &t.delta, t.delta_norm);
            total += cos;
            if w.iter().all(|&wj| wj == 0.0) {
                continue;
            }
            for (i, &si) in s.iter().enumerate() {
                let y = view.targets()[i];
                let deriv = if t.sent.shape().is_linear() {
                    // d/ds [2 r x] = 2 theta_k x + 2 r e_k
                    let x = view.full_input(i, si);
                    let r = linalg::dot(t.sent.values(), &x) - y;
                    2.0 * t.sent.values()[k] * linalg::dot(&w, &x) + 2.0 * r * w[k]
                } else {
                    let plus = per_sample_grad(&t.sent, &view.full_input(i, si + h), y, loss)?;
                    let minus = per_sample_grad(&t.sent, &view.full_input(i, si - h), y, loss)?;
                    plus.iter().zip(&minus).zip(&w).map(|((p, m), wj)| wj * (p - m)).sum::<f64>() / (2.0 * h)
                };
                grad[i] += deriv;
            }
        }
        Ok((total, grad))
    }

    fn mean_cosine(&self, s: &[f64]) -> Result<f64> {
        Ok(self.evaluate(s)?.0 / self.targets.len() as f64)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -(-u.ln()).ln()
}

/// One optimization run over the given rounds.
pub fn run_gumbel<R: Rng + ?Sized>(
    entries: &[&MessageEntry],
    view: &PublicView,
    temperature: f64,
    learning_rate: f64,
    iterations: usize,
    fd_step: f64,
    rng: &mut R,
) -> Result<GumbelRun> {
    let objective = Objective::new(entries, view, fd_step)?;
    let n = view.len();
    let mut logits = vec![[0.0f64; 2]; n];
    let mut relaxed = vec![0.0; n];
    for _ in 0..iterations {
        for (s, l) in relaxed.iter_mut().zip(&logits) {
            let g0 = gumbel(rng);
            let g1 = gumbel(rng);
            *s = sigmoid(((l[1] + g1) - (l[0] + g0)) / temperature);
        }
        let (_, grad) = objective.evaluate(&relaxed)?;
        for ((l, s), g) in logits.iter_mut().zip(&relaxed).zip(&grad) {
            let step = learning_rate * g * s * (1.0 - s) / temperature;
            l[1] += step;
            l[0] -= step;
        }
        if logits.iter().any(|l| !l[0].is_finite() || !l[1].is_finite()) {
            return Err(Error::Numeric("Gumbel-softmax logits diverged".into()));
        }
    }
    let predictions: Vec<u8> = logits.iter().map(|l| u8::from(l[1] >= l[0])).collect();
    let hard: Vec<f64> = predictions.iter().map(|&p| f64::from(p)).collect();
    Ok(GumbelRun {
        accuracy: view.accuracy(&predictions)?,
        objective: objective.mean_cosine(&hard)?,
        initial_objective: objective.mean_cosine(&vec![0.5; n])?,
        rounds: entries.len(),
        learning_rate,
        predictions,
    })
}

/// Runs every (round subset, learning rate) candidate. Each candidate gets its
/// own generator seeded from `rng`, in grid order.
pub fn gumbel_candidates<R: Rng + ?Sized>(
    log: &MessageLog,
    view: &PublicView,
    cfg: &GumbelAiaConfig,
    rng: &mut R,
) -> Result<Vec<GumbelRun>> {
    cfg.validate()?;
    if log.is_empty() {
        return Err(Error::InvalidArgument("gradient-based attack needs a non-empty log".into()));
    }
    let entries: Vec<&MessageEntry> = log.entries().iter().collect();
    let mut sizes: Vec<usize> = cfg
        .fractions
        .iter()
        .map(|f| ((f * entries.len() as f64).floor() as usize).max(1))
        .collect();
    sizes.dedup();
    let mut runs = Vec::new();
    for &size in &sizes {
        for &lr in &cfg.learning_rates {
            let mut local = StreamRng::seed_from_u64(rng.next_u64());
            runs.push(run_gumbel(&entries[..size], view, cfg.temperature, lr, cfg.iterations, cfg.fd_step, &mut local)?);
        }
    }
    Ok(runs)
}

/// Picks a candidate; the first one wins ties.
pub fn select_candidate(runs: &[GumbelRun], criterion: SelectionCriterion) -> Option<&GumbelRun> {
    let key = |r: &GumbelRun| match criterion {
        SelectionCriterion::HighestCosSim => r.objective,
        SelectionCriterion::OracleAccuracy => r.accuracy,
    };
    runs.iter().fold(None, |best: Option<&GumbelRun>, r| match best {
        Some(b) if key(b) >= key(r) => Some(b),
        _ => Some(r),
    })
}

impl GumbelRun {
    pub fn into_outcome(self, criterion: SelectionCriterion) -> AttackOutcome {
        let method = match criterion {
            SelectionCriterion::HighestCosSim => "Grad",
            SelectionCriterion::OracleAccuracy => "Grad-w-O",
        };
        AttackOutcome {
            method: method.into(),
            predictions: self.predictions,
            accuracy: self.accuracy,
            aux: Default::default(),
        }
        .with_aux("cos_sim", self.objective)
        .with_aux("rounds", self.rounds as f64)
        .with_aux("learning_rate", self.learning_rate)
    }
}

/// Gradient-based attack over the configured candidate grid, selected by
/// `cfg.criterion`.
pub fn gradient_based_aia<R: Rng + ?Sized>(
    log: &MessageLog,
    view: &PublicView,
    cfg: &GumbelAiaConfig,
    rng: &mut R,
) -> Result<AttackOutcome> {
    let runs = gumbel_candidates(log, view, cfg, rng)?;
    let best = select_candidate(&runs, cfg.criterion).expect("grid is non-empty").clone();
    Ok(best.into_outcome(cfg.criterion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federated::ClientDataset;
    use crate::models::ModelShape;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize, rounds: usize) -> (PublicView, Vec<MessageEntry>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let mut rows = Vec::new();
        for _ in 0..n {
            let mut r: Vec<f64> = (0..d - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            r.insert(1, f64::from(rng.random_range(0..2u8)));
            rows.push(r);
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ds = ClientDataset::new(RowMatrix::from_rows(&rows).unwrap(), y, Some(1)).unwrap();
        let entries = (0..rounds)
            .map(|t| MessageEntry {
                round: t,
                sent: ModelParams::linear((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(),
                received: ModelParams::linear((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(),
                active: false,
            })
            .collect();
        (ds.public_view().unwrap(), entries)
    }

    #[test]
    fn linear_fast_path_matches_per_sample_path() {
        let (view, entries) = instance(1, 9, 3);
        let refs: Vec<&MessageEntry> = entries.iter().collect();
        let obj = Objective::new(&refs, &view, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let (j_fast, g_fast) = obj.evaluate(&s).unwrap();
        let (j_slow, g_slow) = obj.evaluate_generic(&s).unwrap();
        assert!((j_fast - j_slow).abs() < 1e-12);
        for (a, b) in g_fast.iter().zip(&g_slow) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn attribute_derivative_matches_finite_differences() {
        let (view, entries) = instance(3, 6, 2);
        let refs: Vec<&MessageEntry> = entries.iter().collect();
        let obj = Objective::new(&refs, &view, 1e-4).unwrap();
        let s = vec![0.3, 0.7, 0.5, 0.1, 0.9, 0.4];
        let (_, g) = obj.evaluate(&s).unwrap();
        for i in 0..s.len() {
            let h = 1e-6;
            let mut p = s.clone();
            p[i] += h;
            let mut m = s.clone();
            m[i] -= h;
            let fd = (obj.evaluate(&p).unwrap().0 - obj.evaluate(&m).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "sample {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn mlp_path_matches_finite_differences() {
        let (view, _) = instance(4, 5, 0);
        let shape = ModelShape::Mlp { input: 4, hidden: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let entries: Vec<MessageEntry> = (0..2)
            .map(|t| MessageEntry {
                round: t,
                sent: ModelParams::init(shape, &mut rng),
                received: ModelParams::init(shape, &mut rng),
                active: false,
            })
            .collect();
        let refs: Vec<&MessageEntry> = entries.iter().collect();
        let obj = Objective::new(&refs, &view, 1e-5).unwrap();
        let s = vec![0.2, 0.8, 0.45, 0.6, 0.35];
        let (_, g) = obj.evaluate(&s).unwrap();
        for i in 0..s.len() {
            let h = 1e-5;
            let mut p = s.clone();
            p[i] += h;
            let mut m = s.clone();
            m[i] -= h;
            let fd = (obj.evaluate(&p).unwrap().0 - obj.evaluate(&m).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-4 * (1.0 + fd.abs()), "sample {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let (view, entries) = instance(6, 10, 4);
        let mut log = MessageLog::new(0);
        for e in entries {
            log.push(e).unwrap();
        }
        let cfg = GumbelAiaConfig { iterations: 30, learning_rates: vec![1e2, 1e3], ..Default::default() };
        let a = gradient_based_aia(&log, &view, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = gradient_based_aia(&log, &view, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method, "Grad");
    }

    #[test]
    fn oracle_selection_dominates() {
        let (view, entries) = instance(7, 10, 4);
        let mut log = MessageLog::new(0);
        for e in entries {
            log.push(e).unwrap();
        }
        let mut cfg = GumbelAiaConfig { iterations: 20, ..Default::default() };
        let grad = gradient_based_aia(&log, &view, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        cfg.criterion = SelectionCriterion::OracleAccuracy;
        let oracle = gradient_based_aia(&log, &view, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(oracle.accuracy >= grad.accuracy);
    }

    #[test]
    fn config_validation() {
        assert!(GumbelAiaConfig { temperature: 0.0, ..Default::default() }.validate().is_err());
        assert!(GumbelAiaConfig { iterations: 0, ..Default::default() }.validate().is_err());
        assert!(GumbelAiaConfig { fractions: vec![1.5], ..Default::default() }.validate().is_err());
    }
}
