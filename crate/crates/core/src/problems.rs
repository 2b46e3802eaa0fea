//! Deterministic finite-difference test systems with the block structures
//! the preconditioners target.
//!
//! All grids are the interior nodes of the unit square with homogeneous
//! Dirichlet boundaries, numbered lexicographically (`k = i + n·j`), with
//! spacing `h = 1/(n+1)`. `L_n` denotes the 5-point Laplacian scaled by
//! `h⁻²`; its smallest eigenvalue is `8 h⁻² sin²(πh/2)`, which is at least
//! `18.74` for every `n ≥ 3`.
//!
//! Right-hand sides are drawn from [`Lcg64`] seeded with `spec.seed`,
//! one draw per unknown in monolithic order.

use serde::{Deserialize, Serialize};

use crate::block::{BlockMatrix, BlockVector, FieldLayout};
use crate::error::{Error, Result};
use crate::rng::Lcg64;
use crate::sparse::CsrMatrix;

/// `coupled2`: `A₁₁ = FIRST_FIELD_SCALE·L_n + FIRST_FIELD_SHIFT·I`, a
/// mass-dominated field for which the SIMPLEC lumping is accurate.
pub const FIRST_FIELD_SCALE: f64 = 1e-3;
pub const FIRST_FIELD_SHIFT: f64 = 1e3;
/// `coupled2`: `A₂₂ = SECOND_FIELD_SCALE·L_n + SECOND_FIELD_SHIFT·I`, a
/// diffusion-dominated field.
pub const SECOND_FIELD_SCALE: f64 = 9e-4;
pub const SECOND_FIELD_SHIFT: f64 = 1.1e-3;
/// Documented coupling range of `coupled2` used for sweeps.
pub const COUPLING_RANGE: (f64, f64) = (0.0, 4.0);
/// `coupled2` is symmetric positive definite for couplings below this value:
/// `sqrt((1e-3 λ + 1e3)(9e-4 λ + 1.1e-3))` with `λ = 18.74`, rounded down.
pub const COUPLED2_BREAKDOWN: f64 = 4.23;
/// Mass shift of the first field of `threefield`.
pub const MASS_SHIFT: f64 = 1.0;
/// Velocity mass term of `saddle`, one backward Euler step of size `1e-3`.
pub const SADDLE_SHIFT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Coupled2,
    Saddle,
    Threefield,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled2" => Ok(ProblemKind::Coupled2),
            "saddle" => Ok(ProblemKind::Saddle),
            "threefield" => Ok(ProblemKind::Threefield),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (expected coupled2, saddle or threefield)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Grid points per dimension, at least 3.
    pub n: usize,
    /// Scales every off-diagonal block; ignored by `saddle`.
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_coupling() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, n: usize, coupling: f64, seed: u64) -> Self {
        Self {
            kind,
            n,
            coupling,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!(
                "problem n must be >= 3, got {}",
                self.n
            )));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::Config(format!(
                "problem coupling must be finite and >= 0, got {}",
                self.coupling
            )));
        }
        Ok(())
    }
}

/// Dispatches on `spec.kind`.
pub fn generate(spec: &ProblemSpec) -> Result<(BlockMatrix, BlockVector)> {
    spec.validate()?;
    match spec.kind {
        ProblemKind::Coupled2 => gen_coupled2(spec),
        ProblemKind::Saddle => gen_saddle(spec),
        ProblemKind::Threefield => gen_threefield(spec),
    }
}

/// Two fields on the same `n × n` grid:
///
/// ```text
/// A₁₁ = 1e-3·L_n + 1e3·I        A₁₂ = c·I
/// A₂₁ = c·I                     A₂₂ = 9e-4·L_n + 1.1e-3·I
/// ```
///
/// Both diagonal blocks share the eigenvectors of `L_n`, so on the mode
/// with eigenvalue `λ` the system reduces to `[[a(λ), c], [c, d(λ)]]` and is
/// positive definite iff `c² < a(λ)·d(λ)`. The smallest mode gives the
/// breakdown threshold [`COUPLED2_BREAKDOWN`]. With `c = 0` the coupling
/// blocks are absent.
pub fn gen_coupled2(spec: &ProblemSpec) -> Result<(BlockMatrix, BlockVector)> {
    spec.validate()?;
    let n = spec.n;
    let m = n * n;
    let a11 = shifted(&laplacian2d(n), FIRST_FIELD_SCALE, FIRST_FIELD_SHIFT);
    let a22 = shifted(&laplacian2d(n), SECOND_FIELD_SCALE, SECOND_FIELD_SHIFT);
    let off = coupling_block(&CsrMatrix::identity(m), spec.coupling);
    let layout = FieldLayout::new(vec![m, m])?;
    let a = BlockMatrix::square(layout.clone(), vec![Some(a11), off.clone(), off, Some(a22)])?;
    Ok((a, rhs(&layout, spec.seed)?))
}

/// Stokes-like saddle point system with velocities `(u, v)` on the `n × n`
/// grid and one pressure per node:
///
/// ```text
/// [ K            G_x ]   [ u ]
/// [       K      G_y ] · [ v ]
/// [ −G_xᵀ  −G_yᵀ  ·  ]   [ p ]
/// ```
///
/// with `K = L_n + SADDLE_SHIFT·I`.
///
/// `G_x`, `G_y` are backward differences `(p_k − p_west) / h` with the
/// pressure outside the grid pinned to zero, so `G` has full column rank
/// and the Schur complement is nonsingular. The (2,2) block is absent.
pub fn gen_saddle(spec: &ProblemSpec) -> Result<(BlockMatrix, BlockVector)> {
    spec.validate()?;
    let n = spec.n;
    let m = n * n;
    let lap = shifted(&laplacian2d(n), 1.0, SADDLE_SHIFT);
    let mut a11 = Vec::with_capacity(2 * lap.nnz());
    for (i, j, v) in lap.triplets() {
        a11.push((i, j, v));
        a11.push((i + m, j + m, v));
    }
    let a11 = CsrMatrix::from_triplets(2 * m, 2 * m, &a11)?;
    let h_inv = (n + 1) as f64;
    let mut g = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let k = i + n * j;
            g.push((k, k, h_inv));
            if i > 0 {
                g.push((k, k - 1, -h_inv));
            }
            g.push((m + k, k, h_inv));
            if j > 0 {
                g.push((m + k, k - n, -h_inv));
            }
        }
    }
    let a12 = CsrMatrix::from_triplets(2 * m, m, &g)?;
    let a21 = a12.transpose().scaled(-1.0);
    let layout = FieldLayout::new(vec![2 * m, m])?;
    let a = BlockMatrix::square(layout.clone(), vec![Some(a11), Some(a12), Some(a21), None])?;
    Ok((a, rhs(&layout, spec.seed)?))
}

/// Three fields: nodes of the `n × n` grid, cells of the same grid seen as
/// an `(n−1) × (n−1)` grid, and a second nodal field:
///
/// ```text
/// A₁₁ = L_n + I     A₁₂ = c·W      A₁₃ = c·I
/// A₂₁ = c·Wᵀ        A₂₂ = L_{n−1}  A₂₃ = c·Wᵀ
/// A₃₁ = c·I         A₃₂ = c·W      A₃₃ = 0.5·L_n + I
/// ```
///
/// `W` averages each cell value onto its four corner nodes with weight 1/4.
pub fn gen_threefield(spec: &ProblemSpec) -> Result<(BlockMatrix, BlockVector)> {
    spec.validate()?;
    let n = spec.n;
    let (m1, m2) = (n * n, (n - 1) * (n - 1));
    let a11 = shifted(&laplacian2d(n), 1.0, MASS_SHIFT);
    let a22 = laplacian2d(n - 1);
    let a33 = shifted(&laplacian2d(n), 0.5, MASS_SHIFT);
    let mut w = Vec::with_capacity(4 * m2);
    for cj in 0..n - 1 {
        for ci in 0..n - 1 {
            let c = ci + (n - 1) * cj;
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                w.push((ci + di + n * (cj + dj), c, 0.25));
            }
        }
    }
    let w = CsrMatrix::from_triplets(m1, m2, &w)?;
    let wt = w.transpose();
    let c = spec.coupling;
    let id = CsrMatrix::identity(m1);
    let layout = FieldLayout::new(vec![m1, m2, m1])?;
    let a = BlockMatrix::square(
        layout.clone(),
        vec![
            Some(a11),
            coupling_block(&w, c),
            coupling_block(&id, c),
            coupling_block(&wt, c),
            Some(a22),
            coupling_block(&wt, c),
            coupling_block(&id, c),
            coupling_block(&w, c),
            Some(a33),
        ],
    )?;
    Ok((a, rhs(&layout, spec.seed)?))
}

/// `h⁻²`-scaled 5-point Laplacian on the interior `n × n` grid.
pub fn laplacian2d(n: usize) -> CsrMatrix {
    let s = ((n + 1) * (n + 1)) as f64;
    let mut t = Vec::with_capacity(5 * n * n);
    for j in 0..n {
        for i in 0..n {
            let k = i + n * j;
            t.push((k, k, 4.0 * s));
            if i > 0 {
                t.push((k, k - 1, -s));
            }
            if i + 1 < n {
                t.push((k, k + 1, -s));
            }
            if j > 0 {
                t.push((k, k - n, -s));
            }
            if j + 1 < n {
                t.push((k, k + n, -s));
            }
        }
    }
    CsrMatrix::from_triplets(n * n, n * n, &t).expect("indices are in range")
}

fn shifted(a: &CsrMatrix, scale: f64, shift: f64) -> CsrMatrix {
    let scaled = a.scaled(scale);
    if shift == 0.0 {
        return scaled;
    }
    scaled
        .add_scaled(shift, &CsrMatrix::identity(a.nrows()))
        .expect("square")
}

fn coupling_block(pattern: &CsrMatrix, c: f64) -> Option<CsrMatrix> {
    (c != 0.0).then(|| pattern.scaled(c))
}

fn rhs(layout: &FieldLayout, seed: u64) -> Result<BlockVector> {
    let mut rng = Lcg64::new(seed);
    BlockVector::gather(&rng.uniform_vec(layout.total()), layout)
}
