use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LossKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientWeighting {
    /// `p_c = 1/|C|`
    #[default]
    Uniform,
    /// `p_c = S_c / sum S`
    DatasetSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Participation {
    #[default]
    All,
    /// `per_round` clients drawn uniformly without replacement each round.
    Sampled { per_round: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weighting: ClientWeighting,
    pub participation: Participation,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            local_epochs: 1,
            batch_size: 32,
            learning_rate: 5e-3,
            weighting: ClientWeighting::Uniform,
            participation: Participation::All,
            loss: LossKind::SquaredError,
            seed: 0,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.local_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "rounds, local_epochs and batch_size must all be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if let Participation::Sampled { per_round: 0 } = self.participation {
            return Err(Error::Config("sampled participation needs at least one client per round".into()));
        }
        Ok(())
    }

    /// `K = E * ceil(S_c / B)`.
    pub fn local_steps(&self, samples: usize) -> usize {
        self.local_epochs * samples.div_ceil(self.batch_size)
    }

    /// `ceil(100 / E)`, the round budget used for the neural-network runs.
    pub fn default_rounds_for_epochs(local_epochs: usize) -> usize {
        100usize.div_ceil(local_epochs.max(1))
    }

    pub fn client_weights(&self, sizes: &[usize]) -> Vec<f64> {
        match self.weighting {
            ClientWeighting::Uniform => vec![1.0 / sizes.len() as f64; sizes.len()],
            ClientWeighting::DatasetSize => {
                let total: usize = sizes.iter().sum();
                sizes.iter().map(|&s| s as f64 / total as f64).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DefenseConfig {
    #[default]
    None,
    /// Per-sample clipping to `clip_norm`, then Gaussian noise with standard
    /// deviation `noise_std * clip_norm` on the summed batch gradient.
    DpSgd { clip_norm: f64, noise_std: f64 },
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        if let DefenseConfig::DpSgd { clip_norm, noise_std } = *self {
            if !(clip_norm > 0.0) {
                return Err(Error::Config(format!("clip norm must be positive, got {clip_norm}")));
            }
            if !(noise_std >= 0.0 && noise_std.is_finite()) {
                return Err(Error::Config(format!("noise std must be finite and >= 0, got {noise_std}")));
            }
            if noise_std > 0.0 && clip_norm.is_infinite() {
                return Err(Error::Config("Gaussian noise needs a finite clip norm".into()));
            }
        }
        Ok(())
    }
}
