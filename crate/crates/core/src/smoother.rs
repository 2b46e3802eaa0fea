//! Damped point relaxation: Jacobi and Gauss-Seidel in natural row order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherKind {
    Jacobi,
    GaussSeidelForward,
    GaussSeidelBackward,
    /// One forward then one backward pass per sweep.
    GaussSeidelSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    /// Relaxation weight in (0, 2).
    pub damping: f64,
    pub sweeps: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            kind: SmootherKind::GaussSeidelSymmetric,
            damping: 0.79,
            sweeps: 1,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 2.0) {
            return Err(Error::Config(format!(
                "smoother damping must lie in (0, 2), got {}",
                self.damping
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::Config("smoother sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Smoother {
    a: Arc<CsrMatrix>,
    inv_diag: Vec<f64>,
    cfg: SmootherConfig,
}

impl Smoother {
    pub fn new(a: Arc<CsrMatrix>, cfg: SmootherConfig) -> Result<Self> {
        cfg.validate()?;
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "smoother_setup",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let inv_diag = a
            .diagonal()
            .iter()
            .enumerate()
            .map(|(row, &d)| {
                if d == 0.0 {
                    Err(Error::ZeroDiagonal { row })
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { a, inv_diag, cfg })
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.cfg
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    /// Runs the configured sweeps on `x` in place.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        assert_eq!(b.len(), self.dim());
        assert_eq!(x.len(), self.dim());
        for _ in 0..self.cfg.sweeps {
            match self.cfg.kind {
                SmootherKind::Jacobi => self.jacobi(b, x),
                SmootherKind::GaussSeidelForward => self.gs_row_range(b, x, false),
                SmootherKind::GaussSeidelBackward => self.gs_row_range(b, x, true),
                SmootherKind::GaussSeidelSymmetric => {
                    self.gs_row_range(b, x, false);
                    self.gs_row_range(b, x, true);
                }
            }
        }
    }

    /// Smoothing from a zero initial guess; a fixed linear map of `b`.
    pub fn apply_zero(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.apply(b, &mut x);
        x
    }

    fn jacobi(&self, b: &[f64], x: &mut [f64]) {
        let ax = self.a.spmv(x).expect("shape checked at setup");
        let w = self.cfg.damping;
        for i in 0..x.len() {
            x[i] += w * self.inv_diag[i] * (b[i] - ax[i]);
        }
    }

    fn gs_row_range(&self, b: &[f64], x: &mut [f64], reverse: bool) {
        let w = self.cfg.damping;
        let n = x.len();
        for k in 0..n {
            let i = if reverse { n - 1 - k } else { k };
            let (cols, vals) = self.a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    s -= v * x[j];
                }
            }
            x[i] = (1.0 - w) * x[i] + w * s * self.inv_diag[i];
        }
    }
}
