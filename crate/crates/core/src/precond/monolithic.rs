use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{one, BlockGaussSeidel, Preconditioner, Simple, SmootherSolver, Sweep};
use crate::amg::{build_levels, AmgConfig, AmgLevel, HierarchySummary};
use crate::block::BlockMatrix;
use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::smoother::Smoother;
use crate::sparse::{triple_product, CsrMatrix};

use super::A11Approx;

/// Block iteration used as the smoother on every monolithic level. The inner
/// single-field solves are the point smoothers of the per-field hierarchies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelSmootherSpec {
    Bgs {
        #[serde(default)]
        sweep: Sweep,
        #[serde(default = "one")]
        iterations: usize,
    },
    /// SIMPLEC with the last field as the Schur field. The Schur complement
    /// is smoothed with the last field's point-smoother settings.
    Simple {
        #[serde(default = "one")]
        iterations: usize,
        #[serde(default = "unit")]
        alpha: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl Default for LevelSmootherSpec {
    fn default() -> Self {
        LevelSmootherSpec::Bgs {
            sweep: Sweep::Forward,
            iterations: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonolithicAmgSpec {
    /// AMG settings per field; a single entry applies to every field.
    pub fields: Vec<AmgConfig>,
    pub level_smoother: LevelSmootherSpec,
    /// V-cycles per application.
    pub cycles: usize,
}

impl Default for MonolithicAmgSpec {
    fn default() -> Self {
        Self {
            fields: vec![AmgConfig::default()],
            level_smoother: LevelSmootherSpec::default(),
            cycles: 1,
        }
    }
}

enum BlockSmoother {
    Bgs(BlockGaussSeidel),
    Simple(Simple),
}

impl BlockSmoother {
    fn smooth(&self, b: &[f64], x: &mut [f64]) {
        match self {
            BlockSmoother::Bgs(s) => s.iterate(b, x),
            BlockSmoother::Simple(s) => s.correct(b, x),
        }
    }
}

/// Per-field transfers between level `l` and `l + 1`.
pub struct BlockTransfer {
    pub prolongators: Vec<CsrMatrix>,
    pub restrictors: Vec<CsrMatrix>,
}

struct MonolithicLevel {
    matrix: Arc<BlockMatrix>,
    transfer: Option<BlockTransfer>,
    field_smoothers: Vec<Smoother>,
    smoother: Option<BlockSmoother>,
}

/// Multigrid whose coarse levels keep the block structure. Transfers are
/// block diagonal, built from each field's own hierarchy on `A_ii`, and the
/// coarse blocks are `A^{l+1}_ij = R^l_i A^l_ij P^l_j`.
pub struct MonolithicAmg {
    levels: Vec<MonolithicLevel>,
    coarse: DenseLu,
    cycles: usize,
    label: String,
}

impl MonolithicAmg {
    pub fn build(a: &BlockMatrix, spec: &MonolithicAmgSpec, path: &str) -> Result<Self> {
        Self::build_inner(a, spec, path).map_err(|e| e.at(path))
    }

    fn build_inner(a: &BlockMatrix, spec: &MonolithicAmgSpec, path: &str) -> Result<Self> {
        let n = a.n_fields();
        if spec.cycles == 0 {
            return Err(Error::Config("monolithic_amg cycles must be >= 1".into()));
        }
        let configs: Vec<&AmgConfig> = match spec.fields.len() {
            1 => vec![&spec.fields[0]; n],
            k if k == n => spec.fields.iter().collect(),
            k => {
                return Err(Error::Config(format!(
                    "monolithic_amg has {k} field configs for a {n}-field system"
                )))
            }
        };
        let mut field_levels: Vec<Vec<AmgLevel>> = Vec::with_capacity(n);
        for (i, cfg) in configs.iter().enumerate() {
            let aii = a
                .block(i, i)
                .ok_or(Error::AbsentDiagonalBlock { field: i })?;
            let levels =
                build_levels(aii, cfg).map_err(|e| e.at(&format!("{path}.fields[{i}]")))?;
            field_levels.push(levels);
        }
        let depth = field_levels.iter().map(Vec::len).min().unwrap_or(1);

        let mut levels = Vec::with_capacity(depth);
        let mut current = Arc::new(a.clone());
        for l in 0..depth {
            if l + 1 == depth {
                levels.push(MonolithicLevel {
                    matrix: current.clone(),
                    transfer: None,
                    field_smoothers: Vec::new(),
                    smoother: None,
                });
                break;
            }
            let mut prolongators = Vec::with_capacity(n);
            let mut restrictors = Vec::with_capacity(n);
            let mut field_smoothers = Vec::with_capacity(n);
            for fl in &field_levels {
                let t = fl[l]
                    .transfer
                    .as_ref()
                    .expect("non-coarsest levels carry transfers");
                prolongators.push(t.prolongator.clone());
                restrictors.push(t.restrictor.clone());
                field_smoothers.push(fl[l].smoother.clone().expect("non-coarsest levels smooth"));
            }
            let coarse = galerkin_blocks(&current, &restrictors, &prolongators)?;
            let smoother = level_smoother(&current, &field_smoothers, &spec.level_smoother)?;
            levels.push(MonolithicLevel {
                matrix: current,
                transfer: Some(BlockTransfer {
                    prolongators,
                    restrictors,
                }),
                field_smoothers,
                smoother: Some(smoother),
            });
            current = Arc::new(coarse);
        }
        let coarse = DenseLu::factor(&levels.last().unwrap().matrix.flatten())?;
        Ok(Self {
            levels,
            coarse,
            cycles: spec.cycles,
            label: path.to_string(),
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_matrix(&self, l: usize) -> &BlockMatrix {
        &self.levels[l].matrix
    }

    /// Transfers from level `l` to `l + 1`; `None` on the coarsest level.
    pub fn transfer(&self, l: usize) -> Option<&BlockTransfer> {
        self.levels[l].transfer.as_ref()
    }

    /// Point smoothers taken from the per-field hierarchies on level `l`.
    pub fn field_smoothers(&self, l: usize) -> &[Smoother] {
        &self.levels[l].field_smoothers
    }

    /// One V-cycle on level `l`, improving `x` in place.
    pub fn vcycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let lvl = &self.levels[l];
        let (Some(t), Some(s)) = (&lvl.transfer, &lvl.smoother) else {
            self.coarse.solve_into(b, x);
            return;
        };
        s.smooth(b, x);
        let r = lvl.matrix.residual(b, x);
        let fine = lvl.matrix.row_layout();
        let coarse_layout = self.levels[l + 1].matrix.row_layout();
        let mut bc = vec![0.0; coarse_layout.total()];
        for (i, ri) in t.restrictors.iter().enumerate() {
            ri.spmv_into(&r[fine.range(i)], &mut bc[coarse_layout.range(i)]);
        }
        let mut xc = vec![0.0; bc.len()];
        self.vcycle(l + 1, &bc, &mut xc);
        for (i, pi) in t.prolongators.iter().enumerate() {
            pi.spmv_add(1.0, &xc[coarse_layout.range(i)], &mut x[fine.range(i)]);
        }
        s.smooth(b, x);
    }

    pub fn summary(&self) -> HierarchySummary {
        HierarchySummary::new(
            self.label.clone(),
            self.levels
                .iter()
                .map(|l| l.matrix.row_layout().total())
                .collect(),
            self.levels.iter().map(|l| l.matrix.nnz()).collect(),
        )
    }
}

/// Coarse block matrix with `R_i A_ij P_j` for every present block.
pub fn galerkin_blocks(
    a: &BlockMatrix,
    restrictors: &[CsrMatrix],
    prolongators: &[CsrMatrix],
) -> Result<BlockMatrix> {
    let n = a.n_fields();
    let mut blocks = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            blocks.push(match a.block(i, j) {
                Some(aij) => Some(triple_product(&restrictors[i], aij, &prolongators[j])?),
                None => None,
            });
        }
    }
    let rows = crate::block::FieldLayout::new(restrictors.iter().map(|r| r.nrows()).collect())?;
    let cols = crate::block::FieldLayout::new(prolongators.iter().map(|p| p.ncols()).collect())?;
    BlockMatrix::new(rows, cols, blocks)
}

fn level_smoother(
    a: &Arc<BlockMatrix>,
    field_smoothers: &[Smoother],
    spec: &LevelSmootherSpec,
) -> Result<BlockSmoother> {
    let wrap = |s: &Smoother| Box::new(SmootherSolver(s.clone())) as Box<dyn Preconditioner>;
    match *spec {
        LevelSmootherSpec::Bgs { sweep, iterations } => {
            Ok(BlockSmoother::Bgs(BlockGaussSeidel::from_parts(
                a.clone(),
                field_smoothers.iter().map(wrap).collect(),
                sweep,
                iterations,
            )?))
        }
        LevelSmootherSpec::Simple { iterations, alpha } => {
            let n = a.n_fields();
            if n < 2 {
                return Err(Error::Config(
                    "a simple level smoother needs at least 2 fields".into(),
                ));
            }
            let groups = vec![(0..n - 1).collect::<Vec<_>>(), vec![n - 1]];
            let schur_cfg = *field_smoothers[n - 1].config();
            Ok(BlockSmoother::Simple(Simple::assemble(
                a,
                &groups,
                A11Approx::AbsRowsum,
                iterations,
                alpha,
                |sub| {
                    if n == 2 {
                        return Ok(wrap(&field_smoothers[0]));
                    }
                    let solvers = field_smoothers[..n - 1].iter().map(wrap).collect();
                    Ok(Box::new(BlockGaussSeidel::from_parts(
                        Arc::new(sub.clone()),
                        solvers,
                        Sweep::Forward,
                        1,
                    )?))
                },
                |s| {
                    let s = Smoother::new(Arc::new(s.flatten()), schur_cfg)?;
                    Ok(Box::new(SmootherSolver(s)))
                },
            )?))
        }
    }
}

impl LinearOperator for MonolithicAmg {
    fn dim(&self) -> usize {
        self.levels[0].matrix.row_layout().total()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for _ in 0..self.cycles {
            self.vcycle(0, x, y);
        }
    }
}

impl Preconditioner for MonolithicAmg {
    fn hierarchies(&self) -> Vec<HierarchySummary> {
        vec![self.summary()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amg::AmgHierarchy;
    use crate::block::FieldLayout;
    use crate::precond::{build_preconditioner, PrecondSpec};

    fn laplace1d(n: usize, scale: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 * scale));
            if i > 0 {
                t.push((i, i - 1, -scale));
            }
            if i + 1 < n {
                t.push((i, i + 1, -scale));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    /// Shifted Laplacians coupled through scaled identities.
    fn pair(n: usize, coupling: Option<f64>) -> BlockMatrix {
        let off = coupling.map(|c| CsrMatrix::identity(n).scaled(c));
        let shift = CsrMatrix::identity(n);
        let a11 = laplace1d(n, 1.0).add_scaled(1.0, &shift).unwrap();
        let a22 = laplace1d(n, 2.0).add_scaled(1.0, &shift).unwrap();
        BlockMatrix::square(
            FieldLayout::new(vec![n, n]).unwrap(),
            vec![Some(a11), off.clone(), off, Some(a22)],
        )
        .unwrap()
    }

    fn spec(threshold: usize) -> MonolithicAmgSpec {
        MonolithicAmgSpec {
            fields: vec![AmgConfig {
                coarse_size_threshold: threshold,
                ..Default::default()
            }],
            ..Default::default()
        }
    }

    #[test]
    fn single_field_matches_plain_amg() {
        let a = laplace1d(40, 1.0);
        let cfg = AmgConfig {
            coarse_size_threshold: 5,
            ..Default::default()
        };
        let h = AmgHierarchy::build(&a, &cfg).unwrap();
        let m = MonolithicAmg::build(&BlockMatrix::single(a).unwrap(), &spec(5), "m").unwrap();
        assert_eq!(m.n_levels(), h.n_levels());
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 40];
        m.apply(&b, &mut y);
        let z = h.solve(&b);
        let diff: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
        assert!(crate::vector::norm2(&diff) <= 1e-13 * crate::vector::norm2(&z));
    }

    #[test]
    fn absent_coupling_stays_absent() {
        let m = MonolithicAmg::build(&pair(30, None), &spec(4), "m").unwrap();
        assert!(m.n_levels() > 2);
        for l in 0..m.n_levels() {
            let lm = m.level_matrix(l);
            assert!(lm.block(0, 1).is_none() && lm.block(1, 0).is_none());
        }
    }

    #[test]
    fn one_level_is_direct() {
        let a = pair(5, Some(0.3));
        let m = MonolithicAmg::build(&a, &spec(500), "m").unwrap();
        assert_eq!(m.n_levels(), 1);
        let b = vec![1.0; 10];
        let mut x = vec![0.0; 10];
        m.apply(&b, &mut x);
        assert!(crate::vector::norm2(&a.residual(&b, &x)) < 1e-13);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = MonolithicAmg::build(&pair(30, Some(0.2)), &spec(4), "m").unwrap();
        let mut y = vec![1.0; 60];
        m.apply(&[0.0; 60], &mut y);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unequal_depths_are_truncated() {
        let a = BlockMatrix::square(
            FieldLayout::new(vec![60, 6]).unwrap(),
            vec![
                Some(laplace1d(60, 1.0)),
                None,
                None,
                Some(laplace1d(6, 1.0)),
            ],
        )
        .unwrap();
        let m = MonolithicAmg::build(&a, &spec(4), "m").unwrap();
        let h6 = AmgHierarchy::build(&laplace1d(6, 1.0), &spec(4).fields[0]).unwrap();
        assert_eq!(m.n_levels(), h6.n_levels());
    }

    #[test]
    fn simple_level_smoother_reduces_error() {
        let a = pair(40, Some(0.5));
        let p = build_preconditioner(
            &a,
            &PrecondSpec::MonolithicAmg(MonolithicAmgSpec {
                level_smoother: LevelSmootherSpec::Simple {
                    iterations: 1,
                    alpha: 1.0,
                },
                ..spec(4)
            }),
        )
        .unwrap();
        let b = vec![1.0; 80];
        let mut x = vec![0.0; 80];
        p.apply(&b, &mut x);
        let r = a.residual(&b, &x);
        assert!(crate::vector::norm2(&r) < 0.5 * crate::vector::norm2(&b));
    }

    #[test]
    fn absent_diagonal_is_reported() {
        let a = BlockMatrix::square(
            FieldLayout::new(vec![3, 3]).unwrap(),
            vec![
                Some(laplace1d(3, 1.0)),
                Some(CsrMatrix::identity(3)),
                Some(CsrMatrix::identity(3)),
                None,
            ],
        )
        .unwrap();
        let err = MonolithicAmg::build(&a, &spec(1), "m").err().unwrap();
        assert!(
            matches!(err, Error::Precond { error, .. } if matches!(*error, Error::AbsentDiagonalBlock { field: 1 }))
        );
    }

    #[test]
    fn spec_serde() {
        let s: MonolithicAmgSpec =
            serde_json::from_str(r#"{"level_smoother":{"type":"simple","alpha":0.8},"cycles":2}"#)
                .unwrap();
        assert_eq!(s.cycles, 2);
        assert_eq!(
            s.level_smoother,
            LevelSmootherSpec::Simple {
                iterations: 1,
                alpha: 0.8
            }
        );
        assert_eq!(s.fields.len(), 1);
    }
}
