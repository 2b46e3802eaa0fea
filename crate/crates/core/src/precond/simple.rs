use serde::{Deserialize, Serialize};

use super::{build_node, one, PrecondSpec, Preconditioner};
use crate::amg::{AmgConfig, HierarchySummary};
use crate::block::{validate_partition, BlockMatrix};
use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::sparse::{abs_rowsums, CsrMatrix};

/// Approximation `Ã₁₁` of the predictor block used in the Schur complement
/// and in the velocity-style update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A11Approx {
    /// SIMPLEC lumping: `Ã₁₁ = diag(Σ_j |a_ij|)`.
    #[default]
    AbsRowsum,
    /// `Ã₁₁ = A₁₁` through a dense factorization. Only sensible for small
    /// systems; with an exact predictor solve SIMPLE becomes a direct solver.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimpleSpec {
    /// Two groups of 0-based field indices; the first becomes the predictor
    /// field, the second the Schur field. Empty means `[[0], [1]]`.
    pub groups: Vec<Vec<usize>>,
    pub iterations: usize,
    /// Weight of the `Ã₁₁⁻¹ A₁₂ Δx₂` term in the first-field update.
    pub alpha: f64,
    pub a11_approx: A11Approx,
    pub predictor: Box<PrecondSpec>,
    pub schur: Box<PrecondSpec>,
}

impl Default for SimpleSpec {
    fn default() -> Self {
        Self {
            groups: Vec::new(),
            iterations: one(),
            alpha: 1.0,
            a11_approx: A11Approx::AbsRowsum,
            predictor: Box::new(PrecondSpec::Amg(AmgConfig::default())),
            schur: Box::new(PrecondSpec::Direct),
        }
    }
}

enum A11Inverse {
    Diagonal(Vec<f64>),
    Exact(DenseLu),
}

impl A11Inverse {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            A11Inverse::Diagonal(d) => x.iter().zip(d).map(|(a, b)| a * b).collect(),
            A11Inverse::Exact(lu) => {
                let mut y = vec![0.0; x.len()];
                lu.solve_into(x, &mut y);
                y
            }
        }
    }
}

/// SIMPLE iteration on a (merged) 2×2 block system:
///
/// ```text
/// r  = b − A x
/// Δ₁ = A₁₁⁻¹ r₁                 (predictor solver)
/// Δ₂ = S̃⁻¹ (r₂ − A₂₁ Δ₁)        (Schur solver)
/// x₂ += Δ₂
/// x₁ += Δ₁ − α Ã₁₁⁻¹ A₁₂ Δ₂
/// ```
///
/// with `S̃ = A₂₂ − A₂₁ Ã₁₁⁻¹ A₁₂` assembled explicitly. An absent `A₂₂` is
/// treated as zero.
pub struct Simple {
    merged: BlockMatrix,
    /// Maps merged positions to original monolithic indices; `None` when
    /// the grouping keeps the original order.
    perm: Option<Vec<usize>>,
    a11_inv: A11Inverse,
    schur_matrix: CsrMatrix,
    predictor: Box<dyn Preconditioner>,
    schur: Box<dyn Preconditioner>,
    iterations: usize,
    alpha: f64,
}

impl Simple {
    pub fn build(a: &BlockMatrix, spec: &SimpleSpec, path: &str) -> Result<Self> {
        Self::assemble(
            a,
            &spec.groups,
            spec.a11_approx,
            spec.iterations,
            spec.alpha,
            |sub| build_node(sub, &spec.predictor, &format!("{path}.predictor")),
            |s| build_node(s, &spec.schur, &format!("{path}.schur")),
        )
        .map_err(|e| e.at(path))
    }

    /// Sets up the operator with caller-supplied solver construction.
    /// `predictor` receives the first group's sub-system (original fields,
    /// in group order); `schur` receives `S̃` as a single-field system.
    pub fn assemble(
        a: &BlockMatrix,
        groups: &[Vec<usize>],
        a11_approx: A11Approx,
        iterations: usize,
        alpha: f64,
        predictor: impl FnOnce(&BlockMatrix) -> Result<Box<dyn Preconditioner>>,
        schur: impl FnOnce(&BlockMatrix) -> Result<Box<dyn Preconditioner>>,
    ) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::Config("simple iterations must be >= 1".into()));
        }
        if !alpha.is_finite() {
            return Err(Error::Config(format!(
                "simple alpha must be finite, got {alpha}"
            )));
        }
        let groups: Vec<Vec<usize>> = if groups.is_empty() {
            (0..a.n_fields()).map(|f| vec![f]).collect()
        } else {
            groups.to_vec()
        };
        if groups.len() != 2 {
            return Err(Error::Config(format!(
                "simple needs a 2x2 block structure but got {} groups for a {}-field system",
                groups.len(),
                a.n_fields()
            )));
        }
        validate_partition(&groups, a.n_fields())?;
        let merged = a.merge(&groups)?;
        let perm = a.row_layout().permutation(&groups);
        let perm = (!perm.iter().enumerate().all(|(k, &p)| k == p)).then_some(perm);

        let a11 = merged
            .block(0, 0)
            .ok_or(Error::AbsentDiagonalBlock { field: 0 })?;
        let n2 = merged.row_layout().size(1);
        let a11_inv = match a11_approx {
            A11Approx::AbsRowsum => {
                A11Inverse::Diagonal(abs_rowsums(a11)?.iter().map(|d| 1.0 / d).collect())
            }
            A11Approx::Exact => A11Inverse::Exact(DenseLu::factor(a11)?),
        };
        let a22 = merged
            .block(1, 1)
            .cloned()
            .unwrap_or_else(|| CsrMatrix::zeros(n2, n2));
        let schur_matrix = match (merged.block(0, 1), merged.block(1, 0)) {
            (Some(a12), Some(a21)) => {
                let coupling = match &a11_inv {
                    A11Inverse::Diagonal(d) => a21.matmul(&a12.scale_rows(d))?,
                    A11Inverse::Exact(lu) => exact_schur_term(lu, a12, a21)?,
                };
                a22.add_scaled(-1.0, &coupling)?
            }
            _ => a22,
        };

        let predictor = predictor(&a.subsystem(&groups[0])?)?;
        let schur = schur(&BlockMatrix::single(schur_matrix.clone())?)?;
        Ok(Self {
            merged,
            perm,
            a11_inv,
            schur_matrix,
            predictor,
            schur,
            iterations,
            alpha,
        })
    }

    /// The assembled approximate Schur complement `S̃`.
    pub fn schur_matrix(&self) -> &CsrMatrix {
        &self.schur_matrix
    }

    /// The 2×2 system the iteration acts on.
    pub fn merged(&self) -> &BlockMatrix {
        &self.merged
    }

    /// Runs the configured iterations on `x` (merged ordering) in place.
    pub fn iterate(&self, b: &[f64], x: &mut [f64]) {
        let layout = self.merged.row_layout();
        let (r1, r2) = (layout.range(0), layout.range(1));
        for _ in 0..self.iterations {
            let r = self.merged.residual(b, x);
            let mut d1 = vec![0.0; r1.len()];
            self.predictor.apply(&r[r1.clone()], &mut d1);
            let mut t = r[r2.clone()].to_vec();
            if let Some(a21) = self.merged.block(1, 0) {
                a21.spmv_add(-1.0, &d1, &mut t);
            }
            let mut d2 = vec![0.0; r2.len()];
            self.schur.apply(&t, &mut d2);
            for (xi, di) in x[r2.clone()].iter_mut().zip(&d2) {
                *xi += di;
            }
            if let Some(a12) = self.merged.block(0, 1) {
                let w = self
                    .a11_inv
                    .apply(&a12.spmv(&d2).expect("shapes checked at setup"));
                for (di, wi) in d1.iter_mut().zip(&w) {
                    *di -= self.alpha * wi;
                }
            }
            for (xi, di) in x[r1.clone()].iter_mut().zip(&d1) {
                *xi += di;
            }
        }
    }
}

impl Simple {
    /// Runs the configured iterations on `x` in the original field order.
    pub fn correct(&self, b: &[f64], x: &mut [f64]) {
        match &self.perm {
            None => self.iterate(b, x),
            Some(perm) => {
                let bp: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
                let mut z: Vec<f64> = perm.iter().map(|&p| x[p]).collect();
                self.iterate(&bp, &mut z);
                for (&p, zi) in perm.iter().zip(z) {
                    x[p] = zi;
                }
            }
        }
    }
}

/// `A₂₁ A₁₁⁻¹ A₁₂` with an exact dense solve per column of `A₁₂`.
fn exact_schur_term(lu: &DenseLu, a12: &CsrMatrix, a21: &CsrMatrix) -> Result<CsrMatrix> {
    let cols = a12.transpose();
    let mut triplets = Vec::new();
    for j in 0..cols.nrows() {
        let mut col = vec![0.0; a12.nrows()];
        let (idx, vals) = cols.row(j);
        for (&i, &v) in idx.iter().zip(vals) {
            col[i] = v;
        }
        let z = lu.solve(&col)?;
        for (i, v) in a21.spmv(&z)?.into_iter().enumerate() {
            if v != 0.0 {
                triplets.push((i, j, v));
            }
        }
    }
    CsrMatrix::from_triplets(a21.nrows(), a12.ncols(), &triplets)
}

impl LinearOperator for Simple {
    fn dim(&self) -> usize {
        self.merged.row_layout().total()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.correct(x, y);
    }
}

impl Preconditioner for Simple {
    fn hierarchies(&self) -> Vec<HierarchySummary> {
        let mut h = self.predictor.hierarchies();
        h.extend(self.schur.hierarchies());
        h
    }
}
