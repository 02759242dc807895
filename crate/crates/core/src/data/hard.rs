use crate::error::{Error, Result};
use crate::federated::ClientDataset;
use crate::linalg::RowMatrix;

/// Index of the client carrying the structured data.
pub const HARD_TARGET: usize = 0;

/// A target client whose Gram matrix is tridiagonal (1 on the diagonal, -1/2
/// beside it) with `X^T y = e_1 / 2`, followed by `num_other_clients` clients
/// with `X = I` and `y = 0`.
///
/// `X` is the transposed Cholesky factor of that Gram matrix (upper
/// bidiagonal) and `y` solves `X^T y = e_1 / 2` by forward substitution. Full-batch gradient descent from zero then
/// fills in one coordinate per step.
pub fn generate_hard_instance(dim: usize, num_other_clients: usize) -> Result<Vec<ClientDataset>> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("hard instance needs d >= 2, got {dim}")));
    }
    let mut x = RowMatrix::zeros(dim, dim);
    let mut y = vec![0.0; dim];
    x.set(0, 0, 1.0);
    y[0] = 0.5;
    for i in 0..dim - 1 {
        let prev = x.get(i, i);
        // L[i+1][i] of H = L L^T, stored transposed
        let off = -1.0 / (2.0 * prev);
        let diag = (1.0 - 1.0 / (4.0 * prev * prev)).sqrt();
        x.set(i, i + 1, off);
        x.set(i + 1, i + 1, diag);
        y[i + 1] = -off * y[i] / diag;
    }
    let mut clients = vec![ClientDataset::new(x, y, None)?];
    for _ in 0..num_other_clients {
        clients.push(ClientDataset::new(RowMatrix::identity(dim), vec![0.0; dim], None)?);
    }
    Ok(clients)
}

/// `theta*[i] = 1 - i / (d + 1)` for `i = 1..=d`.
pub fn hard_instance_optimum(dim: usize) -> Vec<f64> {
    (1..=dim).map(|i| 1.0 - i as f64 / (dim as f64 + 1.0)).collect()
}
