use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federated::ClientDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// `h` in `[0, 0.5]`; 0.5 keeps the two clusters pure.
    pub heterogeneity: f64,
    pub num_clients: usize,
    /// Share of each client's rows kept for training.
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { heterogeneity: 0.5, num_clients: 10, train_fraction: 0.9 }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.heterogeneity) {
            return Err(Error::Config(format!("heterogeneity must lie in [0, 0.5], got {}", self.heterogeneity)));
        }
        if self.num_clients < 2 || !self.num_clients.is_multiple_of(2) {
            return Err(Error::Config(format!("the two-cluster split needs an even client count, got {}", self.num_clients)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!("train fraction must lie in (0, 1], got {}", self.train_fraction)));
        }
        Ok(())
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sample_from<R: Rng + ?Sized>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

/// Pool row indices for each client.
///
/// Rows are clustered into `D_h` (attribute 1 with target above the pool
/// median, or attribute 0 at or below it) and `D_l` (the rest). Both are
/// subsampled to `k = min(|D_h|, |D_l|)`, then `floor((0.5 - h) k)` rows are
/// swapped between them. The first half of the clients share `D_l`, the
/// second half `D_h`.
pub fn split_heterogeneous_indices<R: Rng + ?Sized>(
    pool: &ClientDataset,
    cfg: &SplitConfig,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let s = pool.sensitive_values()?;
    let med = median(pool.targets());
    let (high, low): (Vec<usize>, Vec<usize>) = (0..pool.len()).partition(|&i| {
        let rich = pool.targets()[i] > med;
        (s[i] == 1 && rich) || (s[i] == 0 && !rich)
    });
    let k = high.len().min(low.len());
    if k == 0 {
        return Err(Error::Data("one of the two clusters is empty".into()));
    }
    let mut high = sample_from(&high, k, rng);
    let mut low = sample_from(&low, k, rng);
    let swap = ((0.5 - cfg.heterogeneity) * k as f64).floor() as usize;
    if swap > 0 {
        let from_high = index::sample(rng, k, swap).into_vec();
        let from_low = index::sample(rng, k, swap).into_vec();
        for (&a, &b) in from_high.iter().zip(&from_low) {
            std::mem::swap(&mut high[a], &mut low[b]);
        }
    }
    high.shuffle(rng);
    low.shuffle(rng);
    let per_cluster = cfg.num_clients / 2;
    if k < per_cluster {
        return Err(Error::Data(format!("{k} rows per cluster cannot feed {per_cluster} clients")));
    }
    let mut out = Vec::with_capacity(cfg.num_clients);
    for cluster in [&low, &high] {
        let base = k / per_cluster;
        let extra = k % per_cluster;
        let mut start = 0;
        for c in 0..per_cluster {
            let len = base + usize::from(c < extra);
            out.push(cluster[start..start + len].to_vec());
            start += len;
        }
    }
    Ok(out)
}

pub fn split_heterogeneous<R: Rng + ?Sized>(
    pool: &ClientDataset,
    cfg: &SplitConfig,
    rng: &mut R,
) -> Result<Vec<ClientDataset>> {
    split_heterogeneous_indices(pool, cfg, rng)?
        .iter()
        .map(|idx| pool.select(idx))
        .collect()
}
