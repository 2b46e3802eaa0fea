use std::sync::Arc;

use super::{build_node, BgsSpec, Preconditioner, Sweep};
use crate::amg::HierarchySummary;
use crate::block::BlockMatrix;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;

/// Block Gauss-Seidel iteration `x ← x + M⁻¹(b − A x)` where `M` is the block
/// lower (forward) or upper (backward) triangle of `A` and every diagonal
/// solve `A_ii⁻¹` is one application of the field's solver.
pub struct BlockGaussSeidel {
    a: Arc<BlockMatrix>,
    solvers: Vec<Box<dyn Preconditioner>>,
    sweep: Sweep,
    iterations: usize,
}

impl BlockGaussSeidel {
    /// Builds from a spec, constructing each field solver on `A_ii`.
    pub fn build(a: &BlockMatrix, spec: &BgsSpec, path: &str) -> Result<Self> {
        let n = a.n_fields();
        if spec.field_solvers.len() != n {
            return Err(Error::Config(format!(
                "bgs has {} field_solvers for a {n}-field system",
                spec.field_solvers.len()
            ))
            .at(path));
        }
        let mut solvers = Vec::with_capacity(n);
        for (i, child) in spec.field_solvers.iter().enumerate() {
            if a.block(i, i).is_none() {
                return Err(Error::AbsentDiagonalBlock { field: i }.at(path));
            }
            let sub = a.subsystem(&[i]).map_err(|e| e.at(path))?;
            solvers.push(build_node(
                &sub,
                child,
                &format!("{path}.field_solvers[{i}]"),
            )?);
        }
        Self::from_parts(Arc::new(a.clone()), solvers, spec.sweep, spec.iterations)
            .map_err(|e| e.at(path))
    }

    /// Uses prebuilt field solvers, e.g. AMG level smoothers.
    pub fn from_parts(
        a: Arc<BlockMatrix>,
        solvers: Vec<Box<dyn Preconditioner>>,
        sweep: Sweep,
        iterations: usize,
    ) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::Config("bgs iterations must be >= 1".into()));
        }
        if solvers.len() != a.n_fields() {
            return Err(Error::Config("one solver per field is required".into()));
        }
        for (i, s) in solvers.iter().enumerate() {
            if a.block(i, i).is_none() {
                return Err(Error::AbsentDiagonalBlock { field: i });
            }
            if s.dim() != a.row_layout().size(i) {
                return Err(Error::DimensionMismatch {
                    op: "bgs field solver",
                    expected: a.row_layout().size(i),
                    found: s.dim(),
                });
            }
        }
        Ok(Self {
            a,
            solvers,
            sweep,
            iterations,
        })
    }

    pub fn matrix(&self) -> &BlockMatrix {
        &self.a
    }

    /// Runs the configured iterations on `x` in place.
    pub fn iterate(&self, b: &[f64], x: &mut [f64]) {
        for _ in 0..self.iterations {
            match self.sweep {
                Sweep::Forward => self.pass(b, x, false),
                Sweep::Backward => self.pass(b, x, true),
                Sweep::Symmetric => {
                    self.pass(b, x, false);
                    self.pass(b, x, true);
                }
            }
        }
    }

    /// One triangular correction `x += M⁻¹(b − A x)`.
    fn pass(&self, b: &[f64], x: &mut [f64], backward: bool) {
        let layout = self.a.row_layout();
        let n = self.a.n_fields();
        let r = self.a.residual(b, x);
        let mut delta = vec![0.0; r.len()];
        for k in 0..n {
            let i = if backward { n - 1 - k } else { k };
            let mut rhs = r[layout.range(i)].to_vec();
            // only the already-updated fields contribute
            let done: Vec<usize> = if backward {
                (i + 1..n).collect()
            } else {
                (0..i).collect()
            };
            for j in done {
                if let Some(aij) = self.a.block(i, j) {
                    aij.spmv_add(-1.0, &delta[layout.range(j)], &mut rhs);
                }
            }
            self.solvers[i].apply(&rhs, &mut delta[layout.range(i)]);
        }
        for (xi, di) in x.iter_mut().zip(&delta) {
            *xi += di;
        }
    }
}

impl LinearOperator for BlockGaussSeidel {
    fn dim(&self) -> usize {
        self.a.row_layout().total()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.iterate(x, y);
    }
}

impl Preconditioner for BlockGaussSeidel {
    fn hierarchies(&self) -> Vec<HierarchySummary> {
        self.solvers.iter().flat_map(|s| s.hierarchies()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::FieldLayout;
    use crate::precond::{build_preconditioner, PrecondSpec};
    use crate::sparse::CsrMatrix;

    fn scalar_system(vals: &[f64], n: usize) -> BlockMatrix {
        let layout = FieldLayout::new(vec![1; n]).unwrap();
        let blocks = vals
            .iter()
            .map(|&v| (v != 0.0).then(|| CsrMatrix::from_dense(&[vec![v]])))
            .collect();
        BlockMatrix::square(layout, blocks).unwrap()
    }

    fn bgs(sweep: Sweep, iterations: usize, n: usize) -> PrecondSpec {
        PrecondSpec::Bgs(BgsSpec {
            sweep,
            iterations,
            field_solvers: vec![PrecondSpec::Direct; n],
        })
    }

    fn apply(p: &dyn Preconditioner, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; b.len()];
        p.apply(b, &mut y);
        y
    }

    #[test]
    fn forward_hand_evaluation() {
        let a = scalar_system(&[2.0, 1.0, 1.0, 3.0], 2);
        let p = build_preconditioner(&a, &bgs(Sweep::Forward, 1, 2)).unwrap();
        let x = apply(p.as_ref(), &[1.0, 1.0]);
        assert_eq!(x[0], 0.5);
        assert!((x[1] - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn backward_hand_evaluation() {
        // x2 = 1/3, x1 = (1 - 1/3)/2 = 1/3
        let a = scalar_system(&[2.0, 1.0, 1.0, 3.0], 2);
        let p = build_preconditioner(&a, &bgs(Sweep::Backward, 1, 2)).unwrap();
        let x = apply(p.as_ref(), &[1.0, 1.0]);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-16 && (x[1] - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn triangular_systems_are_exact_with_matching_sweep() {
        let lower = scalar_system(&[2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 2.0, 4.0], 3);
        let upper = scalar_system(&[2.0, 1.0, -1.0, 0.0, 3.0, 2.0, 0.0, 0.0, 4.0], 3);
        let b = [1.0, 2.0, 3.0];
        for (a, sweep) in [(&lower, Sweep::Forward), (&upper, Sweep::Backward)] {
            let p = build_preconditioner(a, &bgs(sweep, 1, 3)).unwrap();
            let x = apply(p.as_ref(), &b);
            let r = a.residual(&b, &x);
            assert!(crate::vector::norm2(&r) < 1e-14, "{sweep:?}");
        }
    }

    #[test]
    fn block_diagonal_is_independent_solves() {
        let a = scalar_system(&[2.0, 0.0, 0.0, 4.0], 2);
        for sweep in [Sweep::Forward, Sweep::Backward, Sweep::Symmetric] {
            let p = build_preconditioner(&a, &bgs(sweep, 1, 2)).unwrap();
            assert_eq!(apply(p.as_ref(), &[1.0, 1.0]), vec![0.5, 0.25]);
        }
    }

    #[test]
    fn more_iterations_converge() {
        let a = scalar_system(&[4.0, 1.0, 1.0, 3.0], 2);
        let p = build_preconditioner(&a, &bgs(Sweep::Symmetric, 30, 2)).unwrap();
        let x = apply(p.as_ref(), &[1.0, 2.0]);
        assert!(crate::vector::norm2(&a.residual(&[1.0, 2.0], &x)) < 1e-14);
    }

    #[test]
    fn absent_diagonal_is_reported_with_field() {
        let a = scalar_system(&[2.0, 1.0, 1.0, 0.0], 2);
        let err = build_preconditioner(&a, &bgs(Sweep::Forward, 1, 2))
            .err()
            .unwrap();
        match err {
            Error::Precond { path, error } => {
                assert_eq!(path, "preconditioner");
                assert!(matches!(*error, Error::AbsentDiagonalBlock { field: 1 }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solver_count_mismatch() {
        let a = scalar_system(&[2.0, 1.0, 1.0, 3.0], 2);
        assert!(build_preconditioner(&a, &bgs(Sweep::Forward, 1, 3)).is_err());
        assert!(build_preconditioner(&a, &bgs(Sweep::Forward, 0, 2)).is_err());
    }
}
