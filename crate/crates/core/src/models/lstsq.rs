use nalgebra::DMatrix;

use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::{self, RowMatrix, PINV_RELATIVE_CUTOFF};

/// Minimum-norm least-squares fit `argmin ||X θ - y||`, via the SVD of `X`.
/// Rank-deficient designs fall back to the pseudo-inverse solution.
pub fn solve_least_squares(x: &RowMatrix, y: &[f64]) -> Result<ModelParams> {
    if x.rows() != y.len() {
        return Err(Error::shape(format!("{} targets", x.rows()), y.len()));
    }
    let a = x.to_dmatrix();
    let b = DMatrix::from_column_slice(y.len(), 1, y);
    let sol = linalg::min_norm_solve(&a, &b, PINV_RELATIVE_CUTOFF)?;
    ModelParams::linear(sol.solution.column(0).iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{grad_batch_indexed, LossKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_design_returns_targets() {
        let x = RowMatrix::identity(3);
        let theta = solve_least_squares(&x, &[1.5, -2.0, 7.0]).unwrap();
        for (a, b) in theta.values().iter().zip([1.5, -2.0, 7.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn overdetermined_system_matches_normal_equations() {
        // X = [[1,0],[0,1],[1,1]], y = [1,2,4]
        // XᵀX = [[2,1],[1,2]], Xᵀy = [5,6]; inverse = [[2,-1],[-1,2]]/3
        // θ = [(10-6)/3, (-5+12)/3] = [4/3, 7/3]
        let x = RowMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let theta = solve_least_squares(&x, &[1.0, 2.0, 4.0]).unwrap();
        assert!((theta.values()[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!((theta.values()[1] - 7.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn recovers_noiseless_parameters_and_zeroes_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d) = (40, 6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let x = RowMatrix::from_rows(&rows).unwrap();
        let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = rows.iter().map(|r| linalg::dot(r, &truth)).collect();
        let theta = solve_least_squares(&x, &y).unwrap();
        let err = linalg::distance(theta.values(), &truth) / linalg::norm(&truth);
        assert!(err <= 1e-10, "relative error {err}");

        let noisy: Vec<f64> = y.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let fit = solve_least_squares(&x, &noisy).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let g = grad_batch_indexed(&fit, &x, &noisy, &all, LossKind::SquaredError).unwrap();
        let xty: Vec<f64> = (0..d).map(|k| (0..n).map(|i| x.get(i, k) * noisy[i]).sum()).collect();
        assert!(linalg::norm(&g) <= 1e-8 * (1.0 + linalg::norm(&xty)));
    }

    #[test]
    fn rank_deficient_design_gives_minimum_norm_solution() {
        // duplicated column: minimum-norm splits the weight evenly
        let x = RowMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let theta = solve_least_squares(&x, &[2.0, 4.0]).unwrap();
        assert!((theta.values()[0] - 1.0).abs() < 1e-12);
        assert!((theta.values()[1] - 1.0).abs() < 1e-12);
    }
}
