//! Restarted GMRES with right preconditioning.
//!
//! The preconditioned system `(A P) y = b` is solved and `x = x0 + P y` is
//! recovered at the end of every restart cycle, so the Arnoldi residual is the
//! true (unpreconditioned) residual norm and the stopping rule is
//! `‖b − A x‖₂ ≤ rel_tol · ‖b − A x0‖₂`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::block::BlockMatrix;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::vector::{axpy, dot, is_finite, norm2, scale};

/// Threshold on the new Arnoldi vector norm, relative to `‖A z‖`, below which
/// the Krylov space is considered invariant.
pub const HAPPY_BREAKDOWN_TOL: f64 = 1e-14;

/// A square linear map on monolithic vectors.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// `y = Op(x)`; both slices have length [`dim`](Self::dim).
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y)
    }
}

impl LinearOperator for BlockMatrix {
    fn dim(&self) -> usize {
        self.row_layout().total()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_flat(x, y)
    }
}

/// The identity map, i.e. no preconditioning.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmresConfig {
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Krylov dimension per cycle.
    pub restart: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iters: 500,
            restart: 100,
        }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "gmres.rel_tol must be > 0, got {}",
                self.rel_tol
            )));
        }
        if self.restart == 0 {
            return Err(Error::Config("gmres.restart must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `‖r‖₂ / ‖r⁰‖₂` after each iteration; entry 0 is 1.
    pub residual_history: Vec<f64>,
    /// Recomputed `‖b − A x‖₂ / ‖b − A x0‖₂` at exit.
    pub final_relative_residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

/// Givens rotation `(c, s)` zeroing `b` in `(a, b)`.
fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Solves `A x = b` with restarted GMRES, right-preconditioned by `p`.
/// `x0 = None` starts from zero.
pub fn gmres(
    a: &dyn LinearOperator,
    p: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = a.dim();
    for (what, len) in [("preconditioner", p.dim()), ("right-hand side", b.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                op: what_op(what),
                expected: n,
                found: len,
            });
        }
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::DimensionMismatch {
                op: "gmres initial guess",
                expected: n,
                found: x0.len(),
            })
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    if !is_finite(b) || !is_finite(&x) {
        return Err(Error::NonFinite { iteration: 0 });
    }

    let start = Instant::now();
    let mut ax = vec![0.0; n];
    let residual = |x: &[f64], ax: &mut Vec<f64>| {
        a.apply(x, ax);
        b.iter()
            .zip(ax.iter())
            .map(|(bi, ai)| bi - ai)
            .collect::<Vec<f64>>()
    };

    let mut r = residual(&x, &mut ax);
    let r0_norm = norm2(&r);
    let mut history = vec![1.0];
    let mut report = SolveReport {
        converged: true,
        iterations: 0,
        residual_history: Vec::new(),
        final_relative_residual: 0.0,
        setup_seconds: 0.0,
        solve_seconds: 0.0,
    };
    if r0_norm == 0.0 {
        report.residual_history = history;
        report.solve_seconds = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }
    let tol_abs = cfg.rel_tol * r0_norm;
    let m = cfg.restart.min(n).max(1);

    let mut iters = 0;
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut true_res = r0_norm;
    loop {
        let beta = true_res;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        scale(1.0 / beta, &mut r);
        basis.push(std::mem::take(&mut r));
        // column-major Hessenberg, rotated in place to upper triangular
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut breakdown = false;

        let mut k = 0;
        while k < m && iters < cfg.max_iters {
            p.apply(&basis[k], &mut z);
            a.apply(&z, &mut w);
            if !is_finite(&w) {
                return Err(Error::NonFinite {
                    iteration: iters + 1,
                });
            }
            let w_norm0 = norm2(&w);
            let mut col = vec![0.0; k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                col[i] = hik;
                axpy(-hik, v, &mut w);
            }
            let h_next = norm2(&w);
            col[k + 1] = h_next;
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (u, v) = (col[i], col[i + 1]);
                col[i] = c * u + s * v;
                col[i + 1] = -s * u + c * v;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = 0.0;
            rot.push((c, s));
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h.push(col);
            iters += 1;
            k += 1;

            let est = g[k].abs();
            history.push(est / r0_norm);
            if est <= tol_abs {
                break;
            }
            if h_next <= HAPPY_BREAKDOWN_TOL * w_norm0 {
                breakdown = true;
                break;
            }
            scale(1.0 / h_next, &mut w);
            basis.push(w.clone());
        }

        // a zero pivot means A P is singular on the Krylov space
        if k > 0 && h[k - 1][k - 1] == 0.0 {
            k -= 1;
            breakdown = true;
        }
        // back substitution for the k-dimensional least-squares solution
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                s -= h[j][i] * yj;
            }
            y[i] = s / h[i][i];
        }
        let mut v_y = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut v_y);
        }
        p.apply(&v_y, &mut z);
        axpy(1.0, &z, &mut x);
        if !is_finite(&x) {
            return Err(Error::NonFinite { iteration: iters });
        }

        r = residual(&x, &mut ax);
        true_res = norm2(&r);
        if true_res <= tol_abs {
            break;
        }
        if breakdown {
            return Err(Error::Breakdown {
                iteration: iters,
                residual: true_res / r0_norm,
            });
        }
        if iters >= cfg.max_iters || k == 0 {
            report.converged = false;
            break;
        }
    }

    report.iterations = iters;
    report.residual_history = history;
    report.final_relative_residual = true_res / r0_norm;
    report.solve_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

fn what_op(what: &str) -> &'static str {
    match what {
        "preconditioner" => "gmres preconditioner dimension",
        _ => "gmres right-hand side",
    }
}
