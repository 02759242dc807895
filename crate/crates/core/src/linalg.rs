//! Dense helpers shared by the models and the reconstruction attacks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below `PINV_RELATIVE_CUTOFF * sigma_max` are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Row-major dense matrix; rows are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{rows}x{cols} = {} entries", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::shape(format!("row {i} of width {cols}"), r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Drops column `j`.
    pub fn without_column(&self, j: usize) -> Self {
        let cols = self.cols - 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in self.iter_rows() {
            data.extend_from_slice(&r[..j]);
            data.extend_from_slice(&r[j + 1..]);
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.to_dmatrix();
        m.transpose() * &m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity; zero when either vector vanishes.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Minimum-norm least-squares solution of `A X = B` through the SVD of `A`.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub solution: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

pub fn min_norm_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_cutoff: f64) -> Result<MinNormSolution> {
    if a.nrows() != b.nrows() {
        return Err(Error::shape(
            format!("right-hand side with {} rows", a.nrows()),
            b.nrows(),
        ));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in least-squares system".into()));
    }
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return Ok(MinNormSolution {
            solution: DMatrix::zeros(n, b.ncols()),
            singular_values: Vec::new(),
            rank: 0,
        });
    }
    let svd = a.clone().svd(true, true);
    let (u, v_t) = match (svd.u.as_ref(), svd.v_t.as_ref()) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numeric("SVD did not converge".into())),
    };
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let threshold = rel_cutoff * sigma_max;
    let utb = u.transpose() * b;
    let mut scaled = DMatrix::<f64>::zeros(sigma.len(), b.ncols());
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if s > threshold && s > 0.0 {
            rank += 1;
            for j in 0..b.ncols() {
                scaled[(k, j)] = utb[(k, j)] / s;
            }
        }
    }
    let solution = v_t.transpose() * scaled;
    let mut singular_values: Vec<f64> = sigma.iter().cloned().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    Ok(MinNormSolution {
        solution,
        singular_values,
        rank,
    })
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(a: &DMatrix<f64>, rel_cutoff: f64) -> Result<DMatrix<f64>> {
    let eye = DMatrix::<f64>::identity(a.nrows(), a.nrows());
    Ok(min_norm_solve(a, &eye, rel_cutoff)?.solution)
}

/// Singular values sorted in decreasing order; padded with zeros up to the
/// column count so that rank deficiency from too few rows is visible.
pub fn singular_values_padded(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    while s.len() < a.ncols() {
        s.push(0.0);
    }
    s
}

/// Two-norm condition number; infinite for singular input.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = singular_values_padded(a);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = a.clone().symmetric_eigenvalues().iter().cloned().collect();
    e.sort_by(|x, y| x.total_cmp(y));
    e
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
