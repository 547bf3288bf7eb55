use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// `n` points with a symmetric distance matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    d: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Checks shape, exact symmetry, zero diagonal and finite nonnegative
    /// entries. The triangle inequality is checked separately by
    /// [`Self::triangle_violation`], which is cubic in `n`.
    pub fn new(n: usize, d: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("metric space needs at least one point"));
        }
        if d.len() != n * n {
            return Err(invalid(format!("distance matrix has {} entries, expected {}", d.len(), n * n)));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return Err(invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = d[i * n + j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(invalid(format!("invalid distance {v} at ({i}, {j})")));
                }
                if v != d[j * n + i] {
                    return Err(invalid(format!("asymmetric distances at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("distance matrix is not square"));
        }
        Self::new(n, rows.concat())
    }

    pub fn point() -> Self {
        Self { n: 1, d: alloc::vec![0.0] }
    }

    pub fn two_point(dist: f64) -> Result<Self> {
        Self::new(2, alloc::vec![0.0, dist, dist, 0.0])
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.d
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest `d(i,k) - d(i,j) - d(j,k)`, or 0.
    pub fn triangle_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    worst = worst.max(self.d(i, k) - self.d(i, j) - self.d(j, k));
                }
            }
        }
        worst
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.d.iter().map(|v| c * v).collect())
    }

    /// Subspace on the given indices, in order.
    pub fn subspace(&self, idx: &[usize]) -> Result<Self> {
        let m = idx.len();
        let mut d = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                d.push(self.d(i, j));
            }
        }
        Self::new(m, d)
    }

    /// Point `perm[k]` of `self` becomes point `k` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(invalid("permutation length differs from space size"));
        }
        self.subspace(perm)
    }
}
