//! Composable block preconditioners.
//!
//! A [`PrecondSpec`] tree describes how a block system is preconditioned:
//! block Gauss-Seidel and SIMPLE nodes uncouple fields and delegate the
//! resulting sub-systems to child specs, monolithic AMG keeps the block
//! structure on every level, and `amg`, `smoother` and `direct` leaves act on
//! the (flattened) system they are attached to. Every built operator applies
//! a fixed number of iterations from a zero initial guess, so it is a linear
//! map and can be used with plain right-preconditioned GMRES.

mod bgs;
mod monolithic;
mod simple;

use serde::{Deserialize, Serialize};

pub use bgs::BlockGaussSeidel;
pub use monolithic::{
    galerkin_blocks, BlockTransfer, LevelSmootherSpec, MonolithicAmg, MonolithicAmgSpec,
};
pub use simple::{A11Approx, Simple, SimpleSpec};

use crate::amg::{AmgConfig, AmgHierarchy, HierarchySummary};
use crate::block::BlockMatrix;
use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::smoother::{Smoother, SmootherConfig, SmootherKind};
use std::sync::Arc;

/// A built preconditioner: a linear operator on the monolithic layout of
/// the system it was built for.
pub trait Preconditioner: LinearOperator {
    /// Multigrid hierarchies owned by this node and its children.
    fn hierarchies(&self) -> Vec<HierarchySummary> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Keeps the block lower triangle.
    #[default]
    Forward,
    /// Keeps the block upper triangle.
    Backward,
    /// A forward then a backward pass per iteration.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BgsSpec {
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "one")]
    pub iterations: usize,
    /// One solver per diagonal block, in field order.
    pub field_solvers: Vec<PrecondSpec>,
}

pub(crate) fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PrecondSpec {
    Bgs(BgsSpec),
    Simple(SimpleSpec),
    Amg(AmgConfig),
    MonolithicAmg(MonolithicAmgSpec),
    Smoother(SmootherConfig),
    Direct,
}

impl PrecondSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PrecondSpec::Bgs(_) => "bgs",
            PrecondSpec::Simple(_) => "simple",
            PrecondSpec::Amg(_) => "amg",
            PrecondSpec::MonolithicAmg(_) => "monolithic_amg",
            PrecondSpec::Smoother(_) => "smoother",
            PrecondSpec::Direct => "direct",
        }
    }

    /// Named configurations used by the command-line driver.
    ///
    /// | name             | tree                                              |
    /// |------------------|---------------------------------------------------|
    /// | `direct`         | dense LU of the whole system                      |
    /// | `bgs-amg`        | backward BGS, one AMG V-cycle per field           |
    /// | `bgs-gs`         | backward BGS, 3 symmetric Gauss-Seidel sweeps     |
    /// | `simple-amg`     | SIMPLEC, AMG (or BGS(AMG)) predictor, AMG Schur   |
    /// | `simple-amg-direct` | as `simple-amg` with a direct Schur solve      |
    /// | `amg-bgs`        | monolithic AMG with backward BGS level smoothers  |
    /// | `amg-simple`     | monolithic AMG with SIMPLEC level smoothers       |
    ///
    /// SIMPLE presets split off the last field as the Schur field; a Schur
    /// field with an absent diagonal block always gets a direct solve.
    pub fn preset(name: &str, a: &BlockMatrix) -> Result<PrecondSpec> {
        let n = a.n_fields();
        let amg = || {
            PrecondSpec::Amg(AmgConfig {
                coarse_size_threshold: PRESET_COARSE_SIZE,
                ..Default::default()
            })
        };
        let per_field = |leaf: &dyn Fn() -> PrecondSpec, count: usize| {
            (0..count).map(|_| leaf()).collect::<Vec<_>>()
        };
        let simple = |schur_direct: bool| -> Result<PrecondSpec> {
            if n < 2 {
                return Err(Error::Config(format!(
                    "preset '{name}' needs at least 2 fields"
                )));
            }
            let predictor = if n == 2 {
                amg()
            } else {
                PrecondSpec::Bgs(BgsSpec {
                    sweep: Sweep::Backward,
                    iterations: 1,
                    field_solvers: per_field(&amg, n - 1),
                })
            };
            let schur_absent = a.block(n - 1, n - 1).is_none();
            Ok(PrecondSpec::Simple(SimpleSpec {
                groups: vec![(0..n - 1).collect(), vec![n - 1]],
                predictor: Box::new(predictor),
                schur: Box::new(if schur_direct || schur_absent {
                    PrecondSpec::Direct
                } else {
                    amg()
                }),
                ..SimpleSpec::default()
            }))
        };
        let mono = |level_smoother: LevelSmootherSpec| {
            PrecondSpec::MonolithicAmg(MonolithicAmgSpec {
                fields: vec![AmgConfig {
                    coarse_size_threshold: PRESET_COARSE_SIZE,
                    ..Default::default()
                }],
                level_smoother,
                cycles: 1,
            })
        };
        Ok(match name {
            "direct" => PrecondSpec::Direct,
            "bgs-amg" => PrecondSpec::Bgs(BgsSpec {
                sweep: Sweep::Backward,
                iterations: 1,
                field_solvers: per_field(&amg, n),
            }),
            "bgs-gs" => PrecondSpec::Bgs(BgsSpec {
                sweep: Sweep::Backward,
                iterations: 1,
                field_solvers: per_field(
                    &|| {
                        PrecondSpec::Smoother(SmootherConfig {
                            kind: SmootherKind::GaussSeidelSymmetric,
                            sweeps: 3,
                            ..Default::default()
                        })
                    },
                    n,
                ),
            }),
            "simple-amg" => simple(false)?,
            "simple-amg-direct" => simple(true)?,
            "amg-bgs" => mono(LevelSmootherSpec::Bgs {
                sweep: Sweep::Backward,
                iterations: 1,
            }),
            "amg-simple" => mono(LevelSmootherSpec::Simple {
                iterations: 1,
                alpha: 1.0,
            }),
            other => {
                return Err(Error::Config(format!(
                    "unknown preconditioner preset '{other}' (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }
}

pub const PRESETS: [&str; 7] = [
    "direct",
    "bgs-amg",
    "bgs-gs",
    "simple-amg",
    "simple-amg-direct",
    "amg-bgs",
    "amg-simple",
];

/// Coarse-level size used by the presets' AMG solvers.
pub const PRESET_COARSE_SIZE: usize = 100;

/// Dense LU of the flattened system.
pub struct DirectSolver {
    lu: DenseLu,
}

impl DirectSolver {
    pub fn new(a: &BlockMatrix) -> Result<Self> {
        Ok(Self {
            lu: DenseLu::factor(&a.flatten())?,
        })
    }
}

impl LinearOperator for DirectSolver {
    fn dim(&self) -> usize {
        self.lu.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.lu.solve_into(x, y)
    }
}

impl Preconditioner for DirectSolver {}

/// Point smoother run from a zero initial guess.
pub struct SmootherSolver(pub Smoother);

impl LinearOperator for SmootherSolver {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.0.apply(x, y)
    }
}

impl Preconditioner for SmootherSolver {}

/// Single-field AMG: `cycles` V-cycles from a zero initial guess.
pub struct AmgSolver {
    hierarchy: AmgHierarchy,
    label: String,
}

impl AmgSolver {
    pub fn hierarchy(&self) -> &AmgHierarchy {
        &self.hierarchy
    }
}

impl LinearOperator for AmgSolver {
    fn dim(&self) -> usize {
        self.hierarchy.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for _ in 0..self.hierarchy.cycles() {
            self.hierarchy.vcycle(0, x, y);
        }
    }
}

impl Preconditioner for AmgSolver {
    fn hierarchies(&self) -> Vec<HierarchySummary> {
        vec![self.hierarchy.summary(self.label.clone())]
    }
}

/// Builds the operator described by `spec` for the square block system `a`.
pub fn build_preconditioner(
    a: &BlockMatrix,
    spec: &PrecondSpec,
) -> Result<Box<dyn Preconditioner>> {
    if !a.is_square() {
        return Err(Error::LayoutMismatch(
            "preconditioners need a square block system with equal row and column layouts".into(),
        ));
    }
    build_node(a, spec, "preconditioner")
}

pub(crate) fn build_node(
    a: &BlockMatrix,
    spec: &PrecondSpec,
    path: &str,
) -> Result<Box<dyn Preconditioner>> {
    let built: Result<Box<dyn Preconditioner>> = match spec {
        PrecondSpec::Direct => DirectSolver::new(a).map(|d| Box::new(d) as _),
        PrecondSpec::Smoother(cfg) => {
            Smoother::new(Arc::new(a.flatten()), *cfg).map(|s| Box::new(SmootherSolver(s)) as _)
        }
        PrecondSpec::Amg(cfg) => AmgHierarchy::build(&a.flatten(), cfg).map(|h| {
            Box::new(AmgSolver {
                hierarchy: h,
                label: path.to_string(),
            }) as _
        }),
        PrecondSpec::Bgs(bgs) => {
            return BlockGaussSeidel::build(a, bgs, path).map(|b| Box::new(b) as _)
        }
        PrecondSpec::Simple(s) => return Simple::build(a, s, path).map(|s| Box::new(s) as _),
        PrecondSpec::MonolithicAmg(m) => {
            return MonolithicAmg::build(a, m, path).map(|m| Box::new(m) as _)
        }
    };
    built.map_err(|e| e.at(path))
}
