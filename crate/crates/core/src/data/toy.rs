use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::federated::ClientDataset;
use crate::linalg::RowMatrix;

/// Nine uniform features, the binary attribute, then an intercept column.
pub const TOY_DIM: usize = 11;
pub const TOY_SENSITIVE_COL: usize = 9;

#[derive(Debug, Clone)]
pub struct ToyData {
    pub clients: Vec<ClientDataset>,
    /// Shared by every client.
    pub theta_star: Vec<f64>,
}

/// `y = X theta* + eps`, `theta* ~ N(0, I)`, `eps ~ N(0, noise_std^2)`.
pub fn generate_toy<R: Rng + ?Sized>(
    clients: usize,
    samples: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<ToyData> {
    if samples < TOY_DIM {
        return Err(Error::InvalidArgument(format!(
            "toy clients need at least {TOY_DIM} samples, got {samples}"
        )));
    }
    if clients == 0 {
        return Err(Error::InvalidArgument("at least one client".into()));
    }
    let noise = Normal::new(0.0, noise_std)
        .map_err(|e| Error::InvalidArgument(format!("noise std {noise_std}: {e}")))?;
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let theta_star: Vec<f64> = (0..TOY_DIM).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = Vec::with_capacity(clients);
    for _ in 0..clients {
        let mut data = Vec::with_capacity(samples * TOY_DIM);
        let mut targets = Vec::with_capacity(samples);
        for _ in 0..samples {
            let start = data.len();
            data.extend((0..9).map(|_| rng.random::<f64>()));
            data.push(if coin.sample(rng) { 1.0 } else { 0.0 });
            data.push(1.0);
            let row = &data[start..];
            targets.push(crate::linalg::dot(row, &theta_star) + noise.sample(rng));
        }
        let x = RowMatrix::new(samples, TOY_DIM, data)?;
        out.push(ClientDataset::new(x, targets, Some(TOY_SENSITIVE_COL))?);
    }
    Ok(ToyData { clients: out, theta_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout() {
        let t = generate_toy(2, 64, 0.1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.clients.len(), 2);
        let c = &t.clients[0];
        assert_eq!((c.len(), c.dim()), (64, 11));
        assert!(c.features().column(10).iter().all(|&v| v == 1.0));
        assert!(c.features().column(9).iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(c.features().column(0).iter().all(|&v| (0.0..1.0).contains(&v)));
        assert!(generate_toy(1, 5, 0.1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn seed_determinism() {
        let a = generate_toy(2, 20, 0.1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = generate_toy(2, 20, 0.1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.clients, b.clients);
        assert_eq!(a.theta_star, b.theta_star);
    }
}
