//! Dense reference implementations used as test oracles.
#![allow(dead_code)]

use blockprec::block::BlockMatrix;
use blockprec::krylov::LinearOperator;
use blockprec::smoother::{SmootherConfig, SmootherKind};
use blockprec::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};

pub fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] += v;
    }
    m
}

pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm();
    if scale == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / scale
    }
}

pub fn rel_err(x: &[f64], y: &DVector<f64>) -> f64 {
    let d = dvec(x) - y;
    let s = y.norm();
    if s == 0.0 {
        d.norm()
    } else {
        d.norm() / s
    }
}

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone()
        .lu()
        .solve(b)
        .expect("oracle matrix is nonsingular")
}

/// Dense matrix of a point smoother run from a zero guess, built from the
/// splitting `A = D + L + U` rather than row sweeps.
pub fn smoother_matrix(a: &DMatrix<f64>, cfg: &SmootherConfig) -> DMatrix<f64> {
    let n = a.nrows();
    let w = cfg.damping;
    let d = DMatrix::from_diagonal(&a.diagonal());
    let lower = a.lower_triangle() - &d;
    let upper = a.upper_triangle() - &d;
    let id = DMatrix::<f64>::identity(n, n);
    let inv = |m: DMatrix<f64>| m.try_inverse().expect("smoother splitting is invertible");
    // one step x ← x + B (b − A x) has error propagation I − B A
    let steps: Vec<DMatrix<f64>> = match cfg.kind {
        SmootherKind::Jacobi => vec![inv(d.clone()) * w],
        SmootherKind::GaussSeidelForward => vec![inv(&d + &lower * w) * w],
        SmootherKind::GaussSeidelBackward => vec![inv(&d + &upper * w) * w],
        SmootherKind::GaussSeidelSymmetric => {
            vec![inv(&d + &lower * w) * w, inv(&d + &upper * w) * w]
        }
    };
    // x_{k+1} = (I − B A) x_k + B b, starting from zero
    let mut m = DMatrix::<f64>::zeros(n, n);
    for _ in 0..cfg.sweeps {
        for b in &steps {
            m = (&id - b * a) * m + b;
        }
    }
    m
}

/// Applies `x ← x + S (b − A x)` where `S` is the dense smoother matrix.
pub fn smooth(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
) -> DVector<f64> {
    x + s * (b - a * x)
}

pub fn apply(p: &dyn LinearOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; p.dim()];
    p.apply(x, &mut y);
    y
}

/// Flattened dense copy of a block system.
pub fn dense_block(a: &BlockMatrix) -> DMatrix<f64> {
    dense(&a.flatten())
}

/// 1D Laplacian `tridiag(-s, 2s, -s)` plus `shift·I`.
pub fn laplace1d(n: usize, s: f64, shift: f64) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0 * s + shift));
        if i > 0 {
            t.push((i, i - 1, -s));
        }
        if i + 1 < n {
            t.push((i, i + 1, -s));
        }
    }
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

/// Deterministic pseudo-random vector in `[-1, 1)`.
pub fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = blockprec::rng::Lcg64::new(seed);
    (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect()
}

/// Two-grid cycle `pre-smooth, coarse correction with an exact solve of
/// R A P, post-smooth` from a zero guess, for dense `A`, `S`, `P`, `R`.
pub fn two_grid(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DMatrix<f64>,
    r: &DMatrix<f64>,
    b: &DVector<f64>,
) -> DVector<f64> {
    let x = s * b;
    let ac = r * a * p;
    let xc = solve(&ac, &(r * (b - a * &x)));
    let x = x + p * xc;
    smooth(a, s, b, &x)
}

/// Dense block-diagonal matrix with the given diagonal blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = DMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        m.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    m
}

/// Dense copies of every present block, `None` for absent ones.
pub fn dense_blocks(a: &BlockMatrix) -> Vec<Vec<Option<DMatrix<f64>>>> {
    let n = a.n_fields();
    (0..n)
        .map(|i| (0..n).map(|j| a.block(i, j).map(dense)).collect())
        .collect()
}

/// Dense matrix of one block Gauss-Seidel pass from a zero guess, where the
/// diagonal solves are the dense operators `solves[i]`, evaluated field by
/// field on unit vectors.
pub fn bgs_matrix(a: &BlockMatrix, solves: &[DMatrix<f64>], backward: bool) -> DMatrix<f64> {
    let blocks = dense_blocks(a);
    let layout = a.row_layout();
    let n = a.n_fields();
    let total = layout.total();
    let mut m = DMatrix::zeros(total, total);
    for col in 0..total {
        let mut r = DVector::zeros(total);
        r[col] = 1.0;
        let mut delta: Vec<DVector<f64>> = (0..n).map(|i| DVector::zeros(layout.size(i))).collect();
        let order: Vec<usize> = if backward {
            (0..n).rev().collect()
        } else {
            (0..n).collect()
        };
        for (k, &i) in order.iter().enumerate() {
            let mut rhs = r.rows(layout.offset(i), layout.size(i)).into_owned();
            for &j in &order[..k] {
                if let Some(aij) = &blocks[i][j] {
                    rhs -= aij * &delta[j];
                }
            }
            delta[i] = &solves[i] * rhs;
        }
        for i in 0..n {
            m.view_mut((layout.offset(i), col), (layout.size(i), 1))
                .copy_from(&delta[i]);
        }
    }
    m
}
