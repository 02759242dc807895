//! The server round loop.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;

use super::config::{DefenseConfig, FlConfig, Participation};
use super::dataset::ClientDataset;
use super::local::local_update;
use super::log::{MessageEntry, MessageLog};
use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::rng::{self, Stream, StreamRng};

/// A server-side adversary sitting between the aggregator and the clients.
pub trait AdversaryHook {
    /// Called before `client` trains at `round`. Returning a model replaces
    /// the broadcast for that client only.
    fn intercept(&mut self, round: usize, client: usize, broadcast: &ModelParams) -> Result<Option<ModelParams>>;

    /// Called with what the client actually received and returned.
    fn observe(&mut self, _round: usize, _client: usize, _delivered: &ModelParams, _response: &ModelParams) -> Result<()> {
        Ok(())
    }
}

/// Weighted average with weights renormalized to sum to one.
pub fn aggregate(updates: &[(f64, &ModelParams)]) -> Result<ModelParams> {
    let (_, first) = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    let mut total = 0.0;
    for (w, p) in updates {
        if !(*w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidArgument(format!("aggregation weight {w} is not a finite non-negative number")));
        }
        first.ensure_same_shape(p)?;
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::InvalidArgument("aggregation weights sum to zero".into()));
    }
    let mut acc = vec![0.0; first.len()];
    for (w, p) in updates {
        let w = w / total;
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += w * v;
        }
    }
    first.with_values(acc)
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub global: ModelParams,
    /// One log per tapped client, ordered by client id.
    pub logs: Vec<MessageLog>,
}

impl TrainingOutcome {
    pub fn log(&self, client: usize) -> Option<&MessageLog> {
        self.logs.iter().find(|l| l.client() == client)
    }
}

/// Stateful FedAvg simulation that can be advanced round by round, cloned to
/// branch a run, and attacked through an [`AdversaryHook`].
///
/// Every client owns a batch-order stream and a DP-noise stream; client
/// sampling has its own stream. Taps and hooks therefore never change which
/// random numbers a client consumes.
#[derive(Debug, Clone)]
pub struct FederatedTrainer {
    clients: Vec<ClientDataset>,
    cfg: FlConfig,
    defense: DefenseConfig,
    weights: Vec<f64>,
    global: ModelParams,
    next_round: usize,
    batch_rngs: Vec<StreamRng>,
    noise_rngs: Vec<StreamRng>,
    server_rng: StreamRng,
    logs: BTreeMap<usize, MessageLog>,
}

impl FederatedTrainer {
    pub fn new(
        clients: Vec<ClientDataset>,
        cfg: FlConfig,
        defense: DefenseConfig,
        initial: ModelParams,
        taps: &[usize],
    ) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::Config("federated training needs at least one client".into()));
        }
        cfg.validate()?;
        defense.validate()?;
        if let Participation::Sampled { per_round } = cfg.participation {
            if per_round > clients.len() {
                return Err(Error::Config(format!(
                    "cannot sample {per_round} clients per round out of {}",
                    clients.len()
                )));
            }
        }
        let width = initial.shape().input_dim();
        if let Some((c, d)) = clients.iter().enumerate().find(|(_, d)| d.dim() != width) {
            return Err(Error::Config(format!(
                "client {c} has {} features but the model expects {width}",
                d.dim()
            )));
        }
        initial.ensure_finite()?;
        let taps: BTreeSet<usize> = taps.iter().copied().collect();
        if let Some(&bad) = taps.iter().find(|&&c| c >= clients.len()) {
            return Err(Error::Config(format!("tapped client {bad} does not exist")));
        }
        let sizes: Vec<usize> = clients.iter().map(ClientDataset::len).collect();
        let n = clients.len() as u64;
        Ok(Self {
            weights: cfg.client_weights(&sizes),
            batch_rngs: (0..n).map(|c| rng::stream(cfg.seed, Stream::ClientBatches, c)).collect(),
            noise_rngs: (0..n).map(|c| rng::stream(cfg.seed, Stream::ClientNoise, c)).collect(),
            server_rng: rng::stream(cfg.seed, Stream::ServerSampling, 0),
            logs: taps.into_iter().map(|c| (c, MessageLog::new(c))).collect(),
            clients,
            cfg,
            defense,
            global: initial,
            next_round: 0,
        })
    }

    pub fn clients(&self) -> &[ClientDataset] {
        &self.clients
    }

    pub fn config(&self) -> &FlConfig {
        &self.cfg
    }

    pub fn defense(&self) -> &DefenseConfig {
        &self.defense
    }

    pub fn global(&self) -> &ModelParams {
        &self.global
    }

    /// Index of the next round to run.
    pub fn round(&self) -> usize {
        self.next_round
    }

    pub fn log(&self, client: usize) -> Option<&MessageLog> {
        self.logs.get(&client)
    }

    /// Starts logging `client` from the next round on.
    pub fn tap(&mut self, client: usize) -> Result<()> {
        if client >= self.clients.len() {
            return Err(Error::Config(format!("tapped client {client} does not exist")));
        }
        self.logs.entry(client).or_insert_with(|| MessageLog::new(client));
        Ok(())
    }

    fn participants(&mut self) -> Vec<usize> {
        match self.cfg.participation {
            Participation::All => (0..self.clients.len()).collect(),
            Participation::Sampled { per_round } => {
                let mut chosen = index::sample(&mut self.server_rng, self.clients.len(), per_round).into_vec();
                chosen.sort_unstable();
                chosen
            }
        }
    }

    /// Runs one round. Responses to tampered broadcasts are withheld from
    /// aggregation; if every response was tampered with, the global model is
    /// left unchanged.
    pub fn step(&mut self, mut hook: Option<&mut dyn AdversaryHook>) -> Result<()> {
        let round = self.next_round;
        let mut honest: Vec<(f64, ModelParams)> = Vec::new();
        for c in self.participants() {
            let replaced = match hook.as_deref_mut() {
                Some(h) => h.intercept(round, c, &self.global)?,
                None => None,
            };
            let active = replaced.is_some();
            let delivered = match replaced {
                Some(m) => {
                    self.global.ensure_same_shape(&m)?;
                    m.ensure_finite()?;
                    m
                }
                None => self.global.clone(),
            };
            let response = local_update(
                &delivered,
                &self.clients[c],
                &self.cfg,
                &self.defense,
                &mut self.batch_rngs[c],
                &mut self.noise_rngs[c],
            )?;
            if let Some(h) = hook.as_deref_mut() {
                h.observe(round, c, &delivered, &response)?;
            }
            if let Some(log) = self.logs.get_mut(&c) {
                log.push(MessageEntry { round, sent: delivered, received: response.clone(), active })?;
            }
            if !active {
                honest.push((self.weights[c], response));
            }
        }
        if !honest.is_empty() {
            let refs: Vec<(f64, &ModelParams)> = honest.iter().map(|(w, p)| (*w, p)).collect();
            self.global = aggregate(&refs)?;
        }
        self.next_round += 1;
        Ok(())
    }

    pub fn run_rounds(&mut self, rounds: usize, mut hook: Option<&mut dyn AdversaryHook>) -> Result<()> {
        for _ in 0..rounds {
            self.step(hook.as_mut().map(|h| &mut **h as &mut dyn AdversaryHook))?;
        }
        Ok(())
    }

    pub fn into_outcome(self) -> TrainingOutcome {
        TrainingOutcome {
            global: self.global,
            logs: self.logs.into_values().collect(),
        }
    }
}

/// Runs `cfg.rounds` rounds from `initial`, logging the clients in `taps`.
pub fn run_training(
    clients: Vec<ClientDataset>,
    cfg: &FlConfig,
    defense: &DefenseConfig,
    initial: ModelParams,
    taps: &[usize],
    hook: Option<&mut dyn AdversaryHook>,
) -> Result<TrainingOutcome> {
    let mut trainer = FederatedTrainer::new(clients, cfg.clone(), *defense, initial, taps)?;
    trainer.run_rounds(cfg.rounds, hook)?;
    Ok(trainer.into_outcome())
}
