use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aia::GumbelAiaConfig;
use crate::data::SplitConfig;
use crate::error::{Error, Result};
use crate::federated::{DefenseConfig, FlConfig};
use crate::models::{AdamConfig, ModelShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Toy {
        #[serde(default = "two")]
        clients: usize,
        #[serde(default = "toy_samples")]
        samples: usize,
        #[serde(default = "toy_noise")]
        noise_std: f64,
    },
    HardInstance {
        dim: usize,
        #[serde(default = "one")]
        other_clients: usize,
    },
    Csv {
        path: PathBuf,
        schema: PathBuf,
        #[serde(default)]
        split: CsvSplit,
    },
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn toy_samples() -> usize {
    1024
}
fn toy_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CsvSplit {
    /// Uniformly shuffled, equal shares.
    Iid {
        clients: usize,
        #[serde(default = "train_fraction")]
        train_fraction: f64,
    },
    Heterogeneous(SplitConfig),
}

fn train_fraction() -> f64 {
    0.9
}

impl Default for CsvSplit {
    fn default() -> Self {
        CsvSplit::Iid { clients: 2, train_fraction: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    #[default]
    Linear,
    Mlp {
        #[serde(default = "hidden")]
        hidden: usize,
    },
}

fn hidden() -> usize {
    128
}

impl ModelSpec {
    pub fn shape(&self, input: usize) -> ModelShape {
        match *self {
            ModelSpec::Linear => ModelShape::Linear { dim: input },
            ModelSpec::Mlp { hidden } => ModelShape::Mlp { input, hidden },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "Grad")]
    Grad,
    #[serde(rename = "Grad-w-O")]
    GradWithOracle,
    #[serde(rename = "Ours-passive")]
    OursPassive,
    #[serde(rename = "Ours-active")]
    OursActive,
    #[serde(rename = "Model-w-O")]
    ModelWithOracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Grad,
        Method::GradWithOracle,
        Method::OursPassive,
        Method::OursActive,
        Method::ModelWithOracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Grad => "Grad",
            Method::GradWithOracle => "Grad-w-O",
            Method::OursPassive => "Ours-passive",
            Method::OursActive => "Ours-active",
            Method::ModelWithOracle => "Model-w-O",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the passive linear attack picks its `d + 1` messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoundSelection {
    /// Every logged message.
    All,
    EvenlySpaced,
    /// Best condition number among random subsets.
    ConditionNumber { n_trials: usize },
}

impl Default for RoundSelection {
    fn default() -> Self {
        RoundSelection::ConditionNumber { n_trials: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveGrid {
    pub lr: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
}

impl Default for ActiveGrid {
    fn default() -> Self {
        Self {
            lr: vec![1e-3, 1e-2, 0.1, 1.0, 10.0, 50.0],
            beta1: vec![0.9, 0.99],
            beta2: vec![0.9, 0.99],
        }
    }
}

impl ActiveGrid {
    pub fn points(&self) -> Vec<AdamConfig> {
        let mut out = Vec::new();
        for &lr in &self.lr {
            for &beta1 in &self.beta1 {
                for &beta2 in &self.beta2 {
                    out.push(AdamConfig { lr, beta1, beta2, ..AdamConfig::default() });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackPlan {
    /// Attacked client; every client when unset.
    pub target: Option<usize>,
    pub methods: Vec<Method>,
    pub passive_selection: RoundSelection,
    /// Active-round budgets before scaling.
    pub active_rounds: Vec<usize>,
    /// Replace each budget `n` by `ceil(n / E)`.
    pub scale_active_by_epochs: bool,
    /// Round at which active attacks start; the end of training when unset.
    pub active_start: Option<usize>,
    pub active_grid: ActiveGrid,
    pub gumbel: GumbelAiaConfig,
    /// Full-batch Adam iterations for the MLP oracle.
    pub oracle_budget: usize,
    pub oracle_adam: AdamConfig,
}

impl Default for AttackPlan {
    fn default() -> Self {
        Self {
            target: None,
            methods: Method::ALL.to_vec(),
            passive_selection: RoundSelection::default(),
            active_rounds: vec![10, 50],
            scale_active_by_epochs: true,
            active_start: None,
            active_grid: ActiveGrid::default(),
            gumbel: GumbelAiaConfig::default(),
            oracle_budget: 10_000,
            oracle_adam: AdamConfig::default(),
        }
    }
}

impl AttackPlan {
    pub fn wants(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    pub fn active_budgets(&self, local_epochs: usize) -> Vec<usize> {
        self.active_rounds
            .iter()
            .map(|&n| if self.scale_active_by_epochs { n.div_ceil(local_epochs.max(1)) } else { n })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Record wall-clock seconds in reports; off gives byte-stable output.
    #[serde(default = "yes")]
    pub record_timing: bool,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub fl: FlConfig,
    #[serde(default)]
    pub defense: DefenseConfig,
    #[serde(default)]
    pub attack: AttackPlan,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, dataset: DatasetSpec) -> Self {
        Self {
            name: name.into(),
            seeds: default_seeds(),
            output_dir: None,
            record_timing: true,
            dataset,
            model: ModelSpec::Linear,
            fl: FlConfig::default(),
            defense: DefenseConfig::None,
            attack: AttackPlan::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Relative dataset paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (DatasetSpec::Csv { path: csv, schema, .. }, Some(dir)) = (&mut cfg.dataset, path.parent()) {
            for p in [csv, schema] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.fl.validate()?;
        self.defense.validate()?;
        self.attack.gumbel.validate()?;
        if let Some(start) = self.attack.active_start {
            if start > self.fl.rounds {
                return Err(Error::Config(format!(
                    "active attacks start at round {start}, after the last of {} rounds",
                    self.fl.rounds
                )));
            }
        }
        if self.attack.methods.is_empty() {
            return Err(Error::Config("no attack method selected".into()));
        }
        if self.attack.wants(Method::OursActive) && self.attack.active_grid.points().is_empty() {
            return Err(Error::Config("the active attack grid is empty".into()));
        }
        for a in self.attack.active_grid.points() {
            a.validate()?;
        }
        match &self.dataset {
            DatasetSpec::Csv { split: CsvSplit::Heterogeneous(s), .. } => s.validate()?,
            DatasetSpec::HardInstance { .. } => {
                if let Some(m) = self.attack.methods.iter().find(|m| {
                    !matches!(m, Method::OursPassive | Method::OursActive | Method::ModelWithOracle)
                }) {
                    return Err(Error::Config(format!(
                        "{m} needs a sensitive attribute, which the hard instance does not have"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn active_start(&self) -> usize {
        self.attack.active_start.unwrap_or(self.fl.rounds)
    }
}
