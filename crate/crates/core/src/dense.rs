//! Dense LU with partial pivoting, used as the coarsest-level direct solver.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Relative pivot threshold: a pivot below `PIVOT_TOL * max|A|` is singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Default size up to which a level is considered coarse enough for LU.
pub const DEFAULT_COARSE_SIZE: usize = 500;

/// `P A = L U` stored in place (row-major, unit lower triangle implied).
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    /// `perm[k]` is the original row placed at position `k`.
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "dense_lu_factor",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let n = a.nrows();
        let mut lu = vec![0.0; n * n];
        for (i, j, v) in a.triplets() {
            lu[i * n + j] = v;
        }
        Self::factor_dense(n, lu)
    }

    /// Factors a row-major `n x n` array.
    pub fn factor_dense(n: usize, mut lu: Vec<f64>) -> Result<Self> {
        assert_eq!(lu.len(), n * n);
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let amax = lu.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let threshold = PIVOT_TOL * amax;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut pmax) = (k, lu[k * n + k].abs());
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > pmax {
                    p = i;
                    pmax = v;
                }
            }
            if !(pmax > threshold) {
                return Err(Error::SingularMatrix {
                    column: k,
                    pivot: pmax,
                    threshold,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= l * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                op: "dense_lu_solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Panics on length mismatch.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        assert_eq!(x.len(), n);
        for k in 0..n {
            x[k] = b[self.perm[k]];
        }
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut s = x[i];
            for (l, xj) in row.iter().zip(&x[..i]) {
                s -= l * xj;
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
    }

    /// Reassembles `L U` un-permuted, i.e. the original matrix. Test helper.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    let l = if k == i { 1.0 } else { self.lu[i * n + k] };
                    s += l * self.lu[k * n + j];
                }
                out[self.perm[i]][j] = s;
            }
        }
        out
    }
}
