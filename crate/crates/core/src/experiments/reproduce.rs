//! Canned scenarios: the toy linear table, the batch-size series and the
//! heterogeneity sweep.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{CsvSplit, DatasetSpec, ExperimentConfig, Method, RoundSelection};
use super::report::write_file;
use super::runner::{run_experiment, ExperimentOutput};
use crate::aia::model_based_aia_linear_closed_form;
use crate::data::{generate_toy, SplitConfig, TOY_DIM};
use crate::error::{Error, Result};
use crate::federated::{DefenseConfig, FederatedTrainer, FlConfig};
use crate::models::{solve_least_squares, ModelParams, ModelShape};
use crate::numfmt::f64_17;
use crate::reconstruction::passive_reconstruct_linear;
use crate::rng::{self, Stream};

/// Learning rate shared by the toy scenarios, inside the full-batch
/// stability range `S / (2 lambda_max(X^T X))` of the toy design.
pub const TOY_LEARNING_RATE: f64 = 0.1;

/// Toy setup with every attack and the condition-number message selection.
pub fn toy_linear_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new("toy-linear", DatasetSpec::Toy { clients: 2, samples: 1024, noise_std: 0.1 });
    cfg.fl = FlConfig {
        rounds: 100,
        local_epochs: 1,
        batch_size: 64,
        learning_rate: TOY_LEARNING_RATE,
        ..FlConfig::default()
    };
    cfg.attack.passive_selection = RoundSelection::ConditionNumber { n_trials: 20_000 };
    cfg
}

pub fn toy_linear(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment(cfg)
}

/// Settings of the batch-size series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Config {
    pub batch_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub rounds: usize,
    pub learning_rate: f64,
    pub samples: usize,
    pub noise_std: f64,
    /// Eavesdropped rounds `{i * spacing : i = 0..=d}`.
    pub spacing: usize,
    pub defense: DefenseConfig,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            batch_sizes: vec![64, 256, 1024],
            seeds: vec![0, 1, 2, 3, 4],
            rounds: 300,
            learning_rate: TOY_LEARNING_RATE,
            samples: 1024,
            noise_std: 0.1,
            spacing: 20,
            defense: DefenseConfig::None,
        }
    }
}

/// One client of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Point {
    pub batch_size: usize,
    pub seed: u64,
    pub client: usize,
    pub recon_l2: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Summary {
    pub batch_size: usize,
    pub recon_l2_mean: f64,
    pub recon_l2_std: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

/// Two toy clients trained for `rounds` rounds; the passive attack decodes
/// `d + 1` evenly spaced messages of each client, and the closed-form attack
/// runs on the decoded model. Errors are measured against each client's
/// least-squares optimum.
pub fn fig2(cfg: &Fig2Config) -> Result<Vec<Fig2Point>> {
    let rounds: Vec<usize> = (0..=TOY_DIM).map(|i| i * cfg.spacing).collect();
    if rounds.last().is_some_and(|&r| r >= cfg.rounds) {
        return Err(Error::Config(format!(
            "eavesdropped round {} is past the last of {} rounds",
            rounds[TOY_DIM], cfg.rounds
        )));
    }
    let mut out = Vec::new();
    for &b in &cfg.batch_sizes {
        for &seed in &cfg.seeds {
            let data = generate_toy(2, cfg.samples, cfg.noise_std, &mut rng::stream(seed, Stream::Data, 0))?;
            let fl = FlConfig {
                rounds: cfg.rounds,
                local_epochs: 1,
                batch_size: b,
                learning_rate: cfg.learning_rate,
                seed,
                ..FlConfig::default()
            };
            let initial = ModelParams::zeros(ModelShape::Linear { dim: TOY_DIM });
            let mut trainer = FederatedTrainer::new(data.clients.clone(), fl, cfg.defense, initial, &[0, 1])?;
            trainer.run_rounds(rounds[TOY_DIM] + 1, None)?;
            for (c, ds) in data.clients.iter().enumerate() {
                let log = trainer.log(c).expect("tapped");
                let estimate = passive_reconstruct_linear(log, &rounds)?.estimate;
                let oracle = solve_least_squares(ds.features(), ds.targets())?;
                let accuracy = model_based_aia_linear_closed_form(&estimate, &ds.public_view()?)?.accuracy;
                out.push(Fig2Point {
                    batch_size: b,
                    seed,
                    client: c,
                    recon_l2: estimate.distance(&oracle)?,
                    accuracy,
                });
            }
        }
    }
    Ok(out)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Per batch size, in first-seen order.
pub fn fig2_summary(points: &[Fig2Point]) -> Vec<Fig2Summary> {
    let mut sizes: Vec<usize> = Vec::new();
    for p in points {
        if !sizes.contains(&p.batch_size) {
            sizes.push(p.batch_size);
        }
    }
    sizes
        .into_iter()
        .map(|b| {
            let sel: Vec<&Fig2Point> = points.iter().filter(|p| p.batch_size == b).collect();
            let (recon_l2_mean, recon_l2_std) = mean_std(&sel.iter().map(|p| p.recon_l2).collect::<Vec<_>>());
            let (accuracy_mean, accuracy_std) = mean_std(&sel.iter().map(|p| p.accuracy).collect::<Vec<_>>());
            Fig2Summary { batch_size: b, recon_l2_mean, recon_l2_std, accuracy_mean, accuracy_std }
        })
        .collect()
}

pub fn fig2_points_csv(points: &[Fig2Point]) -> String {
    let mut out = String::from("batch_size,seed,client,recon_l2,accuracy\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.batch_size,
            p.seed,
            p.client,
            f64_17(p.recon_l2),
            f64_17(p.accuracy)
        );
    }
    out
}

pub fn fig2_summary_csv(rows: &[Fig2Summary]) -> String {
    let mut out = String::from("batch_size,recon_l2_mean,recon_l2_std,accuracy_mean,accuracy_std\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.batch_size,
            f64_17(r.recon_l2_mean),
            f64_17(r.recon_l2_std),
            f64_17(r.accuracy_mean),
            f64_17(r.accuracy_std)
        );
    }
    out
}

pub fn write_fig2(points: &[Fig2Point], dir: &Path) -> Result<()> {
    write_file(&dir.join("fig2_points.csv"), &fig2_points_csv(points))?;
    write_file(&dir.join("fig2_summary.csv"), &fig2_summary_csv(&fig2_summary(points)))
}

/// Heterogeneity levels swept by default.
pub const HETEROGENEITY_LEVELS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Runs `base` once per level, replacing its split by the heterogeneous one.
/// Scenario names get a `-h<level>` suffix.
pub fn hetero_sweep(base: &ExperimentConfig, levels: &[f64]) -> Result<Vec<ExperimentOutput>> {
    let split = match &base.dataset {
        DatasetSpec::Csv { split, .. } => split.clone(),
        _ => return Err(Error::Config("the heterogeneity sweep needs a CSV dataset".into())),
    };
    let template = match split {
        CsvSplit::Heterogeneous(s) => s,
        CsvSplit::Iid { clients, train_fraction } => SplitConfig {
            heterogeneity: 0.5,
            num_clients: clients,
            train_fraction,
        },
    };
    let mut out = Vec::with_capacity(levels.len());
    for &h in levels {
        let mut cfg = base.clone();
        cfg.name = format!("{}-h{h}", base.name);
        if let DatasetSpec::Csv { split, .. } = &mut cfg.dataset {
            *split = CsvSplit::Heterogeneous(SplitConfig { heterogeneity: h, ..template });
        }
        out.push(run_experiment(&cfg)?);
    }
    Ok(out)
}

/// Income-like synthetic table for trying the CSV pipeline without external
/// data. Income depends on every column, including the binary `sex`.
pub fn synthetic_census_csv(rows: usize, seed: u64) -> String {
    let mut rng = rng::stream(seed, Stream::Data, 1);
    let mut out = String::from("age,hours,education,worker_class,race,sex,income\n");
    let educations = ["hs", "college", "bachelor", "master", "doctorate"];
    let classes = ["private", "self-employed", "government", "local-gov"];
    let races = ["white", "black", "asian", "other"];
    for _ in 0..rows {
        let age: f64 = rng.random_range(18.0..70.0);
        let hours: f64 = rng.random_range(10.0..60.0);
        let edu = rng.random_range(0..educations.len());
        let class = rng.random_range(0..classes.len());
        let race = rng.random_range(0..races.len());
        let sex = u8::from(rng.random_bool(0.5));
        let noise: f64 = rng.random_range(-1.0..1.0);
        let income = 0.03 * age + 0.04 * hours + 0.4 * edu as f64 + 0.2 * (class == 1) as u8 as f64
            - 0.1 * (race == 3) as u8 as f64
            + 0.8 * f64::from(sex)
            + 0.5 * noise;
        let _ = writeln!(
            out,
            "{age:.1},{hours:.1},{},{},{},{},{income:.4}",
            educations[edu],
            classes[class],
            races[race],
            if sex == 1 { "male" } else { "female" }
        );
    }
    out
}

/// Schema matching [`synthetic_census_csv`].
pub const SYNTHETIC_CENSUS_SCHEMA: &str = r#"target = "income"
numeric = ["age", "hours"]
categorical = ["education", "worker_class"]
standardize_target = true

[sensitive]
column = "sex"
positive = ["male"]

[binarize]
race = ["white"]

[recode.worker_class]
private = "private"
self-employed = "self"
"*" = "public"
"#;

/// A heterogeneity-sweep configuration over a freshly written synthetic
/// table in `dir`.
pub fn synthetic_hetero_config(dir: &Path, rows: usize) -> Result<ExperimentConfig> {
    let csv = dir.join("synthetic_census.csv");
    let schema = dir.join("synthetic_census.toml");
    write_file(&csv, &synthetic_census_csv(rows, 0))?;
    write_file(&schema, SYNTHETIC_CENSUS_SCHEMA)?;
    let mut cfg = ExperimentConfig::new(
        "hetero",
        DatasetSpec::Csv {
            path: csv,
            schema,
            split: CsvSplit::Heterogeneous(SplitConfig { heterogeneity: 0.5, num_clients: 4, train_fraction: 0.9 }),
        },
    );
    cfg.fl = FlConfig { rounds: 50, batch_size: 32, learning_rate: 0.01, ..FlConfig::default() };
    cfg.attack.methods = vec![Method::OursPassive, Method::ModelWithOracle];
    cfg.attack.passive_selection = RoundSelection::ConditionNumber { n_trials: 2_000 };
    Ok(cfg)
}
