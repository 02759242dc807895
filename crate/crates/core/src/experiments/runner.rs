//! Per-seed orchestration: data, training with taps, attacks, metrics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{CsvSplit, DatasetSpec, ExperimentConfig, Method, ModelSpec, RoundSelection};
use super::report::{aggregate_rows, emit_raw, emit_report, write_file, RawRow, ResultRow};
use super::sweep::{sweep, Criterion};
use crate::aia::{gumbel_candidates, model_based_aia, select_candidate, AttackOutcome, GumbelRun, PublicView, SelectionCriterion};
use crate::data::{generate_hard_instance, generate_toy, ingest_csv, split_heterogeneous_indices, CsvSchema, HARD_TARGET};
use crate::error::{Error, Result};
use crate::federated::{ClientDataset, FederatedTrainer, MessageLog};
use crate::models::{mean_loss, Adam, AdamConfig, ModelParams, ModelShape, OptimizerState};
use crate::reconstruction::{
    evenly_spaced_rounds, oracle_local_model, passive_reconstruct_linear, select_message_rounds, ActiveReconstruction,
};
use crate::rng::{self, Stream};

/// One attack result before aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub target: usize,
    pub method: Method,
    pub adversary: String,
    pub active_rounds: usize,
    pub outcome: Option<AttackOutcome>,
    pub recon_l2: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SeedOutput {
    pub seed: u64,
    pub clients: Vec<ClientDataset>,
    /// Passive logs of the attacked clients, ordered by client id.
    pub logs: Vec<MessageLog>,
    pub results: Vec<MethodResult>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub seeds: Vec<SeedOutput>,
    pub raw: Vec<RawRow>,
    pub rows: Vec<ResultRow>,
}

/// Training sets of every client for `seed`.
pub fn build_clients(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ClientDataset>> {
    let mut rng = rng::stream(seed, Stream::Data, 0);
    match &cfg.dataset {
        DatasetSpec::Toy { clients, samples, noise_std } => {
            Ok(generate_toy(*clients, *samples, *noise_std, &mut rng)?.clients)
        }
        DatasetSpec::HardInstance { dim, other_clients } => generate_hard_instance(*dim, *other_clients),
        DatasetSpec::Csv { path, schema, split } => {
            let schema = CsvSchema::load(schema)?;
            let pool = ingest_csv(path, &schema, None)?;
            let (parts, fraction) = match split {
                CsvSplit::Iid { clients, train_fraction } => {
                    if *clients == 0 || *clients > pool.dataset.len() {
                        return Err(Error::Config(format!(
                            "cannot split {} rows among {clients} clients",
                            pool.dataset.len()
                        )));
                    }
                    let mut idx: Vec<usize> = (0..pool.dataset.len()).collect();
                    idx.shuffle(&mut rng);
                    let base = idx.len() / clients;
                    let extra = idx.len() % clients;
                    let mut parts = Vec::with_capacity(*clients);
                    let mut start = 0;
                    for c in 0..*clients {
                        let len = base + usize::from(c < extra);
                        parts.push(idx[start..start + len].to_vec());
                        start += len;
                    }
                    (parts, *train_fraction)
                }
                CsvSplit::Heterogeneous(s) => {
                    (split_heterogeneous_indices(&pool.dataset, s, &mut rng)?, s.train_fraction)
                }
            };
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::Config(format!("train fraction {fraction} not in [0, 1]")));
            }
            let mut train_parts = Vec::with_capacity(parts.len());
            for mut part in parts {
                part.shuffle(&mut rng);
                let keep = ((fraction * part.len() as f64).ceil() as usize).clamp(1, part.len().max(1));
                part.truncate(keep);
                train_parts.push(part);
            }
            let mut fit: Vec<usize> = train_parts.iter().flatten().copied().collect();
            fit.sort_unstable();
            let pool = ingest_csv(path, &schema, Some(&fit))?;
            train_parts.iter().map(|p| pool.dataset.select(p)).collect()
        }
    }
}

pub fn initial_model(model: &ModelSpec, seed: u64, input: usize) -> ModelParams {
    let shape = model.shape(input);
    match model {
        ModelSpec::Linear => ModelParams::zeros(shape),
        ModelSpec::Mlp { .. } => ModelParams::init(shape, &mut rng::stream(seed, Stream::Init, 0)),
    }
}

/// Attacked clients.
pub fn attack_targets(cfg: &ExperimentConfig, n_clients: usize) -> Result<Vec<usize>> {
    let default = match cfg.dataset {
        DatasetSpec::HardInstance { .. } => Some(HARD_TARGET),
        _ => None,
    };
    match cfg.attack.target.or(default) {
        Some(t) if t >= n_clients => Err(Error::Config(format!("target client {t} does not exist"))),
        Some(t) => Ok(vec![t]),
        None => Ok((0..n_clients).collect()),
    }
}

fn model_shape(cfg: &ExperimentConfig, clients: &[ClientDataset]) -> ModelShape {
    cfg.model.shape(clients[0].dim())
}

struct Timer {
    start: Instant,
    enabled: bool,
}

impl Timer {
    fn start(enabled: bool) -> Self {
        Self { start: Instant::now(), enabled }
    }

    fn seconds(&self) -> f64 {
        if self.enabled {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }
}

/// Inputs shared by every attack on one client.
pub struct TargetContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    pub target: usize,
    pub dataset: &'a ClientDataset,
    pub view: Option<PublicView>,
    pub oracle: ModelParams,
}

impl<'a> TargetContext<'a> {
    /// The oracle is exact least squares for linear models and a long
    /// full-batch Adam run from the last broadcast otherwise.
    pub fn new(cfg: &'a ExperimentConfig, seed: u64, target: usize, dataset: &'a ClientDataset, log: &MessageLog) -> Result<Self> {
        let start = match log.entries().last() {
            Some(e) => e.sent.clone(),
            None => initial_model(&cfg.model, seed, dataset.dim()),
        };
        let oracle = oracle_local_model(dataset, &start, cfg.attack.oracle_budget, &cfg.attack.oracle_adam)?;
        let view = match dataset.sensitive_col() {
            Some(_) => Some(dataset.public_view()?),
            None => None,
        };
        Ok(Self { cfg, seed, target, dataset, view, oracle })
    }

    fn view(&self) -> Result<&PublicView> {
        self.view
            .as_ref()
            .ok_or_else(|| Error::Data("the dataset has no sensitive attribute to infer".into()))
    }

    /// Model-based attack on a reconstructed or oracle model. Every model
    /// goes through the same enumeration code path.
    pub fn model_attack(&self, method: Method, params: &ModelParams) -> Result<Option<AttackOutcome>> {
        match &self.view {
            None => Ok(None),
            Some(view) => {
                let mut out = model_based_aia(params, view)?;
                out.method = method.name().to_string();
                Ok(Some(out))
            }
        }
    }

    fn result(&self, method: Method, adversary: &str, active_rounds: usize, outcome: Option<AttackOutcome>, recon: Option<f64>, timer: &Timer) -> MethodResult {
        MethodResult {
            target: self.target,
            method,
            adversary: adversary.to_string(),
            active_rounds,
            outcome,
            recon_l2: recon,
            seconds: timer.seconds(),
        }
    }

    fn grad_results(&self, runs: &[GumbelRun], adversary: &str, active_rounds: usize, timer: &Timer) -> Vec<MethodResult> {
        let mut out = Vec::new();
        for (method, criterion) in [
            (Method::Grad, SelectionCriterion::HighestCosSim),
            (Method::GradWithOracle, SelectionCriterion::OracleAccuracy),
        ] {
            if !self.cfg.attack.wants(method) {
                continue;
            }
            let best = select_candidate(runs, criterion).expect("candidate grid is non-empty").clone();
            out.push(self.result(method, adversary, active_rounds, Some(best.into_outcome(criterion)), None, timer));
        }
        out
    }

    fn passive_rounds(&self, log: &MessageLog) -> Result<Vec<usize>> {
        let n = self.oracle.len() + 1;
        if log.len() <= n {
            return Ok(log.inspected_rounds());
        }
        match self.cfg.attack.passive_selection {
            RoundSelection::All => Ok(log.inspected_rounds()),
            RoundSelection::EvenlySpaced => evenly_spaced_rounds(log, n),
            RoundSelection::ConditionNumber { n_trials } => {
                let mut rng = rng::stream(self.seed, Stream::Selection, self.target as u64);
                select_message_rounds(log, n, n_trials, &mut rng)
            }
        }
    }

    /// Passive reconstruction. Linear models use the least-squares decoder
    /// on the selected rounds; otherwise the last response is the estimate.
    pub fn passive_estimate(&self, log: &MessageLog) -> Result<ModelParams> {
        if self.oracle.shape().is_linear() {
            let rounds = self.passive_rounds(log)?;
            Ok(passive_reconstruct_linear(log, &rounds)?.estimate)
        } else {
            log.last_response()
                .cloned()
                .ok_or_else(|| Error::Protocol(format!("client {} never responded", self.target)))
        }
    }

    fn passive_gumbel(&self, log: &MessageLog) -> Result<Vec<GumbelRun>> {
        let mut rng = rng::stream(self.seed, Stream::Attack, self.target as u64);
        gumbel_candidates(log, self.view()?, &self.cfg.attack.gumbel, &mut rng)
    }

    /// Every attack that only needs the passive log. Offline runs from
    /// persisted logs go through here too.
    pub fn passive_attacks(&self, log: &MessageLog) -> Result<(Vec<MethodResult>, Option<Vec<GumbelRun>>)> {
        let plan = &self.cfg.attack;
        let timing = self.cfg.record_timing;
        let mut out = Vec::new();
        if plan.wants(Method::ModelWithOracle) {
            let t = Timer::start(timing);
            let outcome = self.model_attack(Method::ModelWithOracle, &self.oracle)?;
            out.push(self.result(Method::ModelWithOracle, "oracle", 0, outcome, Some(0.0), &t));
        }
        if plan.wants(Method::OursPassive) {
            let t = Timer::start(timing);
            let estimate = self.passive_estimate(log)?;
            let recon = estimate.distance(&self.oracle)?;
            let outcome = self.model_attack(Method::OursPassive, &estimate)?;
            out.push(self.result(Method::OursPassive, "passive", 0, outcome, Some(recon), &t));
        }
        let mut runs = None;
        if plan.wants(Method::Grad) || plan.wants(Method::GradWithOracle) {
            let t = Timer::start(timing);
            let candidates = self.passive_gumbel(log)?;
            out.extend(self.grad_results(&candidates, "passive", 0, &t));
            runs = Some(candidates);
        }
        Ok((out, runs))
    }

    fn training_loss(&self, params: &ModelParams) -> Result<f64> {
        mean_loss(params, self.dataset.features(), self.dataset.targets(), self.cfg.fl.loss)
    }

    /// Runs the active attack from `snapshot` for `budget` rounds.
    fn run_active(&self, snapshot: &FederatedTrainer, budget: usize, optimizer: OptimizerState) -> Result<(ActiveReconstruction, FederatedTrainer)> {
        let start = snapshot.round();
        let mut trainer = snapshot.clone();
        let mut hook = ActiveReconstruction::new(self.target, start..start + budget, optimizer);
        if let Some(last) = snapshot.log(self.target).and_then(MessageLog::last_response) {
            hook = hook.with_last_response(last.clone());
        }
        trainer.run_rounds(budget, Some(&mut hook))?;
        Ok((hook, trainer))
    }

    /// Active attacks with every budget. Adam hyperparameters are tuned by
    /// the target's training loss at the final estimate.
    pub fn active_attacks(
        &self,
        snapshot: &FederatedTrainer,
        passive_runs: Option<&[GumbelRun]>,
    ) -> Result<Vec<MethodResult>> {
        let plan = &self.cfg.attack;
        let timing = self.cfg.record_timing;
        let mut out = Vec::new();
        let dim = self.oracle.len();
        for budget in plan.active_budgets(self.cfg.fl.local_epochs) {
            if plan.wants(Method::OursActive) {
                let t = Timer::start(timing);
                let grid = plan.active_grid.points();
                let tuned = sweep(&grid, Criterion::MinLoss, |p: &AdamConfig| {
                    let adam = Adam::new(*p, dim)?;
                    match self.run_active(snapshot, budget, OptimizerState::Adam(adam)) {
                        Ok((hook, _)) => match hook.estimate() {
                            Some(e) => Ok(self.training_loss(e).unwrap_or(f64::INFINITY)),
                            None => Ok(f64::INFINITY),
                        },
                        Err(Error::Numeric(_)) => Ok(f64::INFINITY),
                        Err(e) => Err(e),
                    }
                })?;
                if !tuned.best_score.is_finite() {
                    return Err(Error::Numeric("every active-attack setting diverged".into()));
                }
                let (hook, _) = self.run_active(snapshot, budget, OptimizerState::Adam(Adam::new(tuned.best, dim)?))?;
                let estimate = hook.report()?.estimate;
                let recon = estimate.distance(&self.oracle)?;
                let outcome = self.model_attack(Method::OursActive, &estimate)?.map(|o| {
                    o.with_aux("lr", tuned.best.lr)
                        .with_aux("beta1", tuned.best.beta1)
                        .with_aux("beta2", tuned.best.beta2)
                });
                out.push(self.result(Method::OursActive, "active", budget, outcome, Some(recon), &t));
            }
            if plan.wants(Method::Grad) || plan.wants(Method::GradWithOracle) {
                let t = Timer::start(timing);
                // Echo branch: sending back the client's own latest model.
                let (_, trainer) = self.run_active(snapshot, budget, OptimizerState::Sgd { lr: 1.0 })?;
                let log = trainer
                    .log(self.target)
                    .ok_or_else(|| Error::Protocol(format!("client {} was not tapped", self.target)))?;
                let mut runs = match passive_runs {
                    Some(r) if snapshot.round() == self.cfg.fl.rounds => r.to_vec(),
                    _ => self.passive_gumbel(&log.passive_only())?,
                };
                let active = log.restrict(&log.active_rounds())?;
                if !active.is_empty() {
                    let index = ((self.target as u64 + 1) << 32) | budget as u64;
                    let mut rng = rng::stream(self.seed, Stream::Attack, index);
                    runs.extend(gumbel_candidates(&active, self.view()?, &plan.gumbel, &mut rng)?);
                }
                out.extend(self.grad_results(&runs, "active", budget, &t));
            }
        }
        Ok(out)
    }
}

fn with_context<T>(cfg: &ExperimentConfig, seed: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Scenario {
        scenario: cfg.name.clone(),
        seed,
        source: Box::new(e),
    })
}

/// Training and every attack for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    with_context(cfg, seed, run_seed_inner(cfg, seed))
}

fn wants_active(cfg: &ExperimentConfig) -> bool {
    let plan = &cfg.attack;
    !plan.active_rounds.is_empty()
        && (plan.wants(Method::OursActive) || plan.wants(Method::Grad) || plan.wants(Method::GradWithOracle))
}

fn run_seed_inner(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let clients = build_clients(cfg, seed)?;
    let targets = attack_targets(cfg, clients.len())?;
    let initial = initial_model(&cfg.model, seed, clients[0].dim());
    let fl = crate::federated::FlConfig { seed, ..cfg.fl.clone() };
    let mut trainer = FederatedTrainer::new(clients.clone(), fl, cfg.defense, initial, &targets)?;
    let start = cfg.active_start();
    trainer.run_rounds(start, None)?;
    let snapshot = wants_active(cfg).then(|| trainer.clone());
    trainer.run_rounds(cfg.fl.rounds - start, None)?;

    let mut logs = Vec::new();
    let mut results = Vec::new();
    for &c in &targets {
        let log = trainer.log(c).expect("targets are tapped").clone();
        let ctx = TargetContext::new(cfg, seed, c, &clients[c], &log)?;
        let (passive, runs) = ctx.passive_attacks(&log)?;
        results.extend(passive);
        if let Some(snap) = &snapshot {
            results.extend(ctx.active_attacks(snap, runs.as_deref())?);
        }
        logs.push(log);
    }
    Ok(SeedOutput { seed, clients, logs, results })
}

fn raw_rows(cfg: &ExperimentConfig, seeds: &[SeedOutput]) -> Vec<RawRow> {
    let mut raw = Vec::new();
    for s in seeds {
        for r in &s.results {
            raw.push(RawRow {
                scenario: cfg.name.clone(),
                seed: s.seed,
                target: r.target,
                method: r.method,
                adversary: r.adversary.clone(),
                active_rounds: r.active_rounds,
                accuracy: r.outcome.as_ref().map(|o| o.accuracy),
                recon_l2: r.recon_l2,
                seconds: r.seconds,
            });
        }
    }
    raw
}

fn finish(cfg: &ExperimentConfig, seeds: Vec<SeedOutput>) -> ExperimentOutput {
    let raw = raw_rows(cfg, &seeds);
    let rows = aggregate_rows(&raw);
    ExperimentOutput { seeds, raw, rows }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let seeds = cfg.seeds.iter().map(|&s| run_seed(cfg, s)).collect::<Result<Vec<_>>>()?;
    Ok(finish(cfg, seeds))
}

pub fn log_path(dir: &Path, seed: u64, client: usize) -> PathBuf {
    dir.join("logs").join(format!("seed{seed}_client{client}.jsonl"))
}

/// Trains every seed and writes only the message logs of the attacked
/// clients, plus the resolved configuration.
pub fn train_only(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut written = Vec::new();
    for &seed in &cfg.seeds {
        let r: Result<()> = (|| {
            let clients = build_clients(cfg, seed)?;
            let targets = attack_targets(cfg, clients.len())?;
            let initial = initial_model(&cfg.model, seed, clients[0].dim());
            let fl = crate::federated::FlConfig { seed, ..cfg.fl.clone() };
            let mut trainer = FederatedTrainer::new(clients, fl, cfg.defense, initial, &targets)?;
            trainer.run_rounds(cfg.fl.rounds, None)?;
            for &c in &targets {
                let path = log_path(dir, seed, c);
                write_file(&path, &trainer.log(c).expect("tapped").to_jsonl())?;
                written.push(path);
            }
            Ok(())
        })();
        with_context(cfg, seed, r)?;
    }
    write_file(&dir.join("config.toml"), &cfg.to_toml_string()?)?;
    Ok(written)
}

/// Re-runs the passive attacks from logs under `dir`. Client data is
/// regenerated from the configuration.
pub fn attack_from_logs(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut seeds = Vec::new();
    for &seed in &cfg.seeds {
        let r: Result<SeedOutput> = (|| {
            let clients = build_clients(cfg, seed)?;
            let shape = model_shape(cfg, &clients);
            let mut logs = Vec::new();
            let mut results = Vec::new();
            for c in attack_targets(cfg, clients.len())? {
                let log = MessageLog::read_jsonl(&log_path(dir, seed, c), c, Some(shape))?;
                let ctx = TargetContext::new(cfg, seed, c, &clients[c], &log)?;
                results.extend(ctx.passive_attacks(&log)?.0);
                logs.push(log);
            }
            Ok(SeedOutput { seed, clients, logs, results })
        })();
        seeds.push(with_context(cfg, seed, r)?);
    }
    Ok(finish(cfg, seeds))
}

#[derive(Serialize)]
struct OutcomeRecord<'a> {
    seed: u64,
    #[serde(flatten)]
    result: &'a MethodResult,
}

/// Writes `report.csv`, `raw.csv`, `report.json`, `outcomes.json`,
/// `config.toml` and the message logs.
pub fn write_artifacts(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    let json = |e: serde_json::Error| Error::Data(e.to_string());
    write_file(&dir.join("report.csv"), &emit_report(&out.rows)?)?;
    write_file(&dir.join("raw.csv"), &emit_raw(&out.raw)?)?;
    write_file(&dir.join("report.json"), &serde_json::to_string_pretty(&out.rows).map_err(json)?)?;
    let records: Vec<OutcomeRecord> = out
        .seeds
        .iter()
        .flat_map(|s| s.results.iter().map(move |r| OutcomeRecord { seed: s.seed, result: r }))
        .collect();
    write_file(&dir.join("outcomes.json"), &serde_json::to_string_pretty(&records).map_err(json)?)?;
    write_file(&dir.join("config.toml"), &cfg.to_toml_string()?)?;
    for s in &out.seeds {
        for log in &s.logs {
            write_file(&log_path(dir, s.seed, log.client()), &log.to_jsonl())?;
        }
    }
    Ok(())
}

/// Results keyed by `(seed, target, method, adversary, active_rounds)`.
pub fn index_results(out: &ExperimentOutput) -> BTreeMap<(u64, usize, Method, String, usize), &MethodResult> {
    let mut map = BTreeMap::new();
    for s in &out.seeds {
        for r in &s.results {
            map.insert((s.seed, r.target, r.method, r.adversary.clone(), r.active_rounds), r);
        }
    }
    map
}
