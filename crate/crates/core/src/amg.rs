//! Smoothed-aggregation algebraic multigrid for a single field.
//!
//! Coarse operators are Galerkin products `A_{l+1} = R_l A_l P_l` with
//! `R_l = P_lᵀ`. The near-null space is one constant vector per dof
//! component, so every coarse level keeps the fine level's `dofs_per_node`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::{DenseLu, DEFAULT_COARSE_SIZE};
use crate::error::{Error, Result};
use crate::rng::Lcg64;
use crate::smoother::{Smoother, SmootherConfig};
use crate::sparse::{triple_product, CsrMatrix};
use crate::vector::norm2;

/// Power iterations used for the `auto` prolongator damping.
pub const POWER_ITERATIONS: usize = 10;
const POWER_SEED: u64 = 0x5eed;

/// Damping of the prolongator smoother `I − ω D⁻¹A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DampingRepr", into = "DampingRepr")]
pub enum ProlongatorDamping {
    /// `ω = 4/3 / ρ(D⁻¹A)`, with ρ estimated by power iteration.
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DampingRepr {
    Value(f64),
    Name(String),
}

impl TryFrom<DampingRepr> for ProlongatorDamping {
    type Error = String;

    fn try_from(r: DampingRepr) -> std::result::Result<Self, String> {
        match r {
            DampingRepr::Value(v) => Ok(Self::Fixed(v)),
            DampingRepr::Name(s) if s == "auto" => Ok(Self::Auto),
            DampingRepr::Name(s) => Err(format!("expected a number or \"auto\", got \"{s}\"")),
        }
    }
}

impl From<ProlongatorDamping> for DampingRepr {
    fn from(d: ProlongatorDamping) -> Self {
        match d {
            ProlongatorDamping::Auto => DampingRepr::Name("auto".into()),
            ProlongatorDamping::Fixed(v) => DampingRepr::Value(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmgConfig {
    pub max_levels: usize,
    /// Levels with at most this many rows are solved directly.
    pub coarse_size_threshold: usize,
    pub prolongator_damping: ProlongatorDamping,
    /// Pre- and post-smoother on every level but the coarsest.
    pub smoother: SmootherConfig,
    pub dofs_per_node: usize,
    /// V-cycles per application when used as a solver.
    pub cycles: usize,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            max_levels: 10,
            coarse_size_threshold: DEFAULT_COARSE_SIZE,
            prolongator_damping: ProlongatorDamping::Auto,
            smoother: SmootherConfig::default(),
            dofs_per_node: 1,
            cycles: 1,
        }
    }
}

impl AmgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_levels == 0 {
            return Err(Error::Config("amg max_levels must be >= 1".into()));
        }
        if self.dofs_per_node == 0 {
            return Err(Error::Config("amg dofs_per_node must be >= 1".into()));
        }
        if self.cycles == 0 {
            return Err(Error::Config("amg cycles must be >= 1".into()));
        }
        if let ProlongatorDamping::Fixed(w) = self.prolongator_damping {
            if !w.is_finite() {
                return Err(Error::Config(
                    "amg prolongator_damping must be finite".into(),
                ));
            }
        }
        self.smoother.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    pub node_to_aggregate: Vec<usize>,
    pub n_aggregates: usize,
    pub dofs_per_node: usize,
}

impl Aggregation {
    pub fn n_nodes(&self) -> usize {
        self.node_to_aggregate.len()
    }

    pub fn aggregate_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_aggregates];
        for &a in &self.node_to_aggregate {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Sorted neighbor lists of the node graph (self loops excluded).
fn node_graph(a: &CsrMatrix, dofs_per_node: usize) -> Vec<Vec<usize>> {
    let n_nodes = a.nrows() / dofs_per_node;
    let mut adj = vec![Vec::new(); n_nodes];
    for (i, j, v) in a.triplets() {
        let (ni, nj) = (i / dofs_per_node, j / dofs_per_node);
        if ni != nj && v != 0.0 {
            adj[ni].push(nj);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Greedy root aggregation.
///
/// Pass 1 scans nodes in ascending order; an unassigned node whose neighbors
/// are all unassigned becomes a root and absorbs its neighbors. Pass 2 puts
/// each remaining node into the aggregate of its lowest-index assigned
/// neighbor, or into a new singleton when it has none.
pub fn aggregate(a: &CsrMatrix, dofs_per_node: usize) -> Result<Aggregation> {
    if a.nrows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "aggregate",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if dofs_per_node == 0 || !a.nrows().is_multiple_of(dofs_per_node) {
        return Err(Error::Config(format!(
            "{} rows are not divisible by dofs_per_node = {dofs_per_node}",
            a.nrows()
        )));
    }
    let adj = node_graph(a, dofs_per_node);
    const UNASSIGNED: usize = usize::MAX;
    let mut agg = vec![UNASSIGNED; adj.len()];
    let mut count = 0;
    for node in 0..adj.len() {
        if agg[node] == UNASSIGNED && adj[node].iter().all(|&nb| agg[nb] == UNASSIGNED) {
            agg[node] = count;
            for &nb in &adj[node] {
                agg[nb] = count;
            }
            count += 1;
        }
    }
    for node in 0..adj.len() {
        if agg[node] == UNASSIGNED {
            agg[node] = match adj[node].iter().find(|&&nb| agg[nb] != UNASSIGNED) {
                Some(&nb) => agg[nb],
                None => {
                    count += 1;
                    count - 1
                }
            };
        }
    }
    Ok(Aggregation {
        node_to_aggregate: agg,
        n_aggregates: count,
        dofs_per_node,
    })
}

/// Piecewise-constant injection with orthonormal columns: coarse dof
/// `(aggregate, component)` takes `1/√|aggregate|` on each member node's
/// matching component.
pub fn tentative_prolongator(agg: &Aggregation) -> CsrMatrix {
    let d = agg.dofs_per_node;
    let sizes = agg.aggregate_sizes();
    let nrows = agg.n_nodes() * d;
    let mut row_offsets = Vec::with_capacity(nrows + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::with_capacity(nrows);
    let mut values = Vec::with_capacity(nrows);
    for &a in &agg.node_to_aggregate {
        let w = 1.0 / (sizes[a] as f64).sqrt();
        for c in 0..d {
            col_indices.push(a * d + c);
            values.push(w);
            row_offsets.push(values.len());
        }
    }
    CsrMatrix::try_new(
        nrows,
        agg.n_aggregates * d,
        row_offsets,
        col_indices,
        values,
    )
    .expect("one entry per row")
}

fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .iter()
        .enumerate()
        .map(|(row, &d)| {
            if d == 0.0 {
                Err(Error::ZeroDiagonal { row })
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

/// `P = (I − ω D⁻¹A) P_tent`; returns `P_tent` unchanged when `ω = 0`.
pub fn smooth_prolongator(a: &CsrMatrix, p_tent: &CsrMatrix, omega: f64) -> Result<CsrMatrix> {
    if a.ncols() != p_tent.nrows() || !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "smooth_prolongator",
            expected: a.ncols(),
            found: p_tent.nrows(),
        });
    }
    let inv_diag = inverse_diagonal(a)?;
    if omega == 0.0 {
        return Ok(p_tent.clone());
    }
    let dap = a.scale_rows(&inv_diag).matmul(p_tent)?;
    p_tent.add_scaled(-omega, &dap)
}

/// Power-iteration estimate of `ρ(D⁻¹A)` from a fixed seeded start vector.
pub fn estimate_spectral_radius(a: &CsrMatrix) -> Result<f64> {
    let inv_diag = inverse_diagonal(a)?;
    let mut v = Lcg64::new(POWER_SEED).uniform_vec(a.nrows());
    let mut w = vec![0.0; a.nrows()];
    let mut rho = 0.0;
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    for _ in 0..POWER_ITERATIONS {
        a.spmv_into(&v, &mut w);
        for (wi, di) in w.iter_mut().zip(&inv_diag) {
            *wi *= di;
        }
        rho = norm2(&w);
        if rho == 0.0 {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / rho;
        }
    }
    Ok(rho)
}

/// Fine-to-coarse transfer data for one level.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub prolongator: CsrMatrix,
    pub restrictor: CsrMatrix,
}

#[derive(Debug, Clone)]
pub struct AmgLevel {
    pub matrix: Arc<CsrMatrix>,
    /// Absent on the coarsest level.
    pub transfer: Option<Transfer>,
    pub smoother: Option<Smoother>,
}

/// Builds the level matrices and transfers (no coarse factorization).
/// The last level returned is the coarsest.
pub fn build_levels(a: &CsrMatrix, cfg: &AmgConfig) -> Result<Vec<AmgLevel>> {
    cfg.validate()?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "build_hierarchy",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let dpn = cfg.dofs_per_node;
    let mut levels = Vec::new();
    let mut current = Arc::new(a.clone());
    loop {
        let last =
            current.nrows() <= cfg.coarse_size_threshold || levels.len() + 1 >= cfg.max_levels;
        let next = if last {
            None
        } else {
            let agg = aggregate(&current, dpn)?;
            if agg.n_aggregates == agg.n_nodes() {
                None
            } else {
                let p_tent = tentative_prolongator(&agg);
                let omega = match cfg.prolongator_damping {
                    ProlongatorDamping::Fixed(w) => w,
                    ProlongatorDamping::Auto => {
                        let rho = estimate_spectral_radius(&current)?;
                        if rho > 0.0 {
                            4.0 / 3.0 / rho
                        } else {
                            0.0
                        }
                    }
                };
                let p = smooth_prolongator(&current, &p_tent, omega)?;
                let r = p.transpose();
                let coarse = triple_product(&r, &current, &p)?;
                Some((
                    Transfer {
                        prolongator: p,
                        restrictor: r,
                    },
                    coarse,
                ))
            }
        };
        match next {
            Some((transfer, coarse)) => {
                let smoother = Smoother::new(current.clone(), cfg.smoother)?;
                levels.push(AmgLevel {
                    matrix: current,
                    transfer: Some(transfer),
                    smoother: Some(smoother),
                });
                current = Arc::new(coarse);
            }
            None => {
                levels.push(AmgLevel {
                    matrix: current,
                    transfer: None,
                    smoother: None,
                });
                return Ok(levels);
            }
        }
    }
}

/// Per-level size statistics, printable for `print-hierarchy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySummary {
    pub label: String,
    pub level_rows: Vec<usize>,
    pub level_nnz: Vec<usize>,
    pub operator_complexity: f64,
}

impl HierarchySummary {
    pub fn new(label: impl Into<String>, rows: Vec<usize>, nnz: Vec<usize>) -> Self {
        let total: usize = nnz.iter().sum();
        let operator_complexity = if nnz[0] == 0 {
            1.0
        } else {
            total as f64 / nnz[0] as f64
        };
        Self {
            label: label.into(),
            level_rows: rows,
            level_nnz: nnz,
            operator_complexity,
        }
    }
}

impl fmt::Display for HierarchySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {} level(s)", self.label, self.level_rows.len())?;
        for (l, (r, z)) in self.level_rows.iter().zip(&self.level_nnz).enumerate() {
            writeln!(f, "  level {l}: {r:>8} rows {z:>10} nnz")?;
        }
        write!(f, "  operator complexity: {:.3}", self.operator_complexity)
    }
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarse: DenseLu,
    cycles: usize,
}

impl AmgHierarchy {
    pub fn build(a: &CsrMatrix, cfg: &AmgConfig) -> Result<Self> {
        let levels = build_levels(a, cfg)?;
        let coarse = DenseLu::factor(&levels.last().unwrap().matrix)?;
        Ok(Self {
            levels,
            coarse,
            cycles: cfg.cycles,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &AmgLevel {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[AmgLevel] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels[0].matrix.nrows()
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    /// One V-cycle on level `level`, improving `x` in place.
    pub fn vcycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        let lvl = &self.levels[level];
        match (&lvl.transfer, &lvl.smoother) {
            (Some(t), Some(s)) => {
                s.apply(b, x);
                let mut r = vec![0.0; b.len()];
                lvl.matrix.spmv_into(x, &mut r);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri = bi - *ri;
                }
                let bc = t
                    .restrictor
                    .spmv(&r)
                    .expect("transfer shapes are consistent");
                let mut xc = vec![0.0; bc.len()];
                self.vcycle(level + 1, &bc, &mut xc);
                t.prolongator.spmv_add(1.0, &xc, x);
                s.apply(b, x);
            }
            _ => self.coarse.solve_into(b, x),
        }
    }

    /// `cycles` V-cycles from a zero initial guess.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        for _ in 0..self.cycles {
            self.vcycle(0, b, &mut x);
        }
        x
    }

    pub fn summary(&self, label: impl Into<String>) -> HierarchySummary {
        HierarchySummary::new(
            label,
            self.levels.iter().map(|l| l.matrix.nrows()).collect(),
            self.levels.iter().map(|l| l.matrix.nnz()).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn laplacian_2d(m: usize) -> CsrMatrix {
        let mut t = Vec::new();
        let id = |i: usize, j: usize| i * m + j;
        for i in 0..m {
            for j in 0..m {
                t.push((id(i, j), id(i, j), 4.0));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, m * m, &t).unwrap()
    }

    #[test]
    fn aggregate_single_node() {
        let agg = aggregate(&CsrMatrix::identity(1), 1).unwrap();
        assert_eq!(agg.node_to_aggregate, vec![0]);
        assert_eq!(agg.n_aggregates, 1);
    }

    #[test]
    fn aggregate_chain_of_six() {
        // pass 1: root 0 takes {0,1}; node 2 touches 1 so it waits; node 3
        // is a root taking {2,3,4}; node 5 touches 4 and waits.
        // pass 2: node 5 joins node 4's aggregate.
        let agg = aggregate(&laplacian_1d(6), 1).unwrap();
        assert_eq!(agg.node_to_aggregate, vec![0, 0, 1, 1, 1, 1]);
        assert_eq!(agg.n_aggregates, 2);
    }

    #[test]
    fn aggregate_diagonal_gives_singletons() {
        let agg = aggregate(&CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]), 1).unwrap();
        assert_eq!(agg.node_to_aggregate, vec![0, 1, 2]);
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(
            aggregate(&CsrMatrix::zeros(0, 0), 1),
            Err(Error::EmptyMatrix)
        ));
        assert!(aggregate(&CsrMatrix::identity(3), 2).is_err());
    }

    #[test]
    fn aggregate_groups_dofs_into_nodes() {
        // two dofs per node, nodes 0-1-2 chained through off-block entries
        let a = laplacian_1d(6);
        let agg = aggregate(&a, 2).unwrap();
        assert_eq!(agg.n_nodes(), 3);
        assert_eq!(agg.node_to_aggregate, vec![0, 0, 0]);
    }

    #[test]
    fn tentative_examples() {
        let one = Aggregation {
            node_to_aggregate: vec![0],
            n_aggregates: 1,
            dofs_per_node: 1,
        };
        assert_eq!(tentative_prolongator(&one).to_dense(), vec![vec![1.0]]);
        let four = Aggregation {
            node_to_aggregate: vec![0; 4],
            n_aggregates: 1,
            dofs_per_node: 1,
        };
        assert_eq!(tentative_prolongator(&four).to_dense(), vec![vec![0.5]; 4]);
        let two = Aggregation {
            node_to_aggregate: vec![0, 1],
            n_aggregates: 2,
            dofs_per_node: 1,
        };
        assert_eq!(tentative_prolongator(&two), CsrMatrix::identity(2));
    }

    #[test]
    fn tentative_columns_orthonormal() {
        let agg = aggregate(&laplacian_2d(9), 1).unwrap();
        let p = tentative_prolongator(&agg);
        let ptp = p.transpose().matmul(&p).unwrap();
        for i in 0..ptp.nrows() {
            for j in 0..ptp.ncols() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ptp.get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn smooth_prolongator_trivial_cases() {
        let a = laplacian_1d(4);
        let agg = aggregate(&a, 1).unwrap();
        let pt = tentative_prolongator(&agg);
        assert_eq!(smooth_prolongator(&a, &pt, 0.0).unwrap(), pt);
        let id = CsrMatrix::identity(4);
        let p = smooth_prolongator(&id, &pt, 0.25).unwrap();
        for (i, j, v) in pt.triplets() {
            assert_eq!(p.get(i, j), 0.75 * v);
        }
        let singular = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert!(smooth_prolongator(&singular, &CsrMatrix::identity(2), 0.5).is_err());
    }

    #[test]
    fn spectral_radius_of_jacobi_laplacian() {
        // D⁻¹A for the 1D Laplacian has eigenvalues 1 - cos(kπ/(n+1)) in (0, 2)
        let rho = estimate_spectral_radius(&laplacian_1d(50)).unwrap();
        assert!(rho > 1.5 && rho < 2.0, "{rho}");
    }

    #[test]
    fn small_matrix_gives_single_level() {
        let h = AmgHierarchy::build(&laplacian_2d(5), &AmgConfig::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let b: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let x = h.solve(&b);
        let r = crate::vector::sub(&b, &laplacian_2d(5).spmv(&x).unwrap());
        assert!(norm2(&r) <= 1e-10 * norm2(&b));
    }

    #[test]
    fn identity_stalls_to_one_level() {
        let cfg = AmgConfig {
            coarse_size_threshold: 1,
            ..Default::default()
        };
        assert_eq!(
            AmgHierarchy::build(&CsrMatrix::identity(20), &cfg)
                .unwrap()
                .n_levels(),
            1
        );
    }

    #[test]
    fn laplacian_32_coarsens_by_half() {
        let a = laplacian_2d(32);
        let h = AmgHierarchy::build(&a, &AmgConfig::default()).unwrap();
        assert!(h.n_levels() >= 2);
        for w in h.levels().windows(2) {
            assert!(2 * w[1].matrix.nrows() <= w[0].matrix.nrows());
        }
        let cfg = AmgConfig {
            coarse_size_threshold: 10,
            ..Default::default()
        };
        let h = AmgHierarchy::build(&a, &cfg).unwrap();
        assert!(h.n_levels() >= 3);
        for l in h.levels() {
            if let Some(t) = &l.transfer {
                assert_eq!(t.restrictor, t.prolongator.transpose());
            }
        }
        assert!(h.level(h.n_levels() - 1).matrix.nrows() <= 10);
    }

    #[test]
    fn max_levels_respected() {
        let cfg = AmgConfig {
            coarse_size_threshold: 1,
            max_levels: 2,
            ..Default::default()
        };
        assert_eq!(
            AmgHierarchy::build(&laplacian_2d(12), &cfg)
                .unwrap()
                .n_levels(),
            2
        );
    }

    #[test]
    fn zero_rhs_stays_zero() {
        let cfg = AmgConfig {
            coarse_size_threshold: 20,
            ..Default::default()
        };
        let h = AmgHierarchy::build(&laplacian_2d(10), &cfg).unwrap();
        assert!(h.n_levels() > 1);
        assert_eq!(h.solve(&[0.0; 100]), vec![0.0; 100]);
    }

    #[test]
    fn vcycle_reduces_error_on_laplacian() {
        let a = laplacian_2d(32);
        let cfg = AmgConfig {
            coarse_size_threshold: 50,
            ..Default::default()
        };
        let h = AmgHierarchy::build(&a, &cfg).unwrap();
        let x_true = Lcg64::new(7).uniform_vec(a.nrows());
        let b = a.spmv(&x_true).unwrap();
        let mut x = vec![0.0; a.nrows()];
        let e0 = norm2(&x_true);
        for _ in 0..10 {
            h.vcycle(0, &b, &mut x);
        }
        let e10 = norm2(&crate::vector::sub(&x_true, &x));
        let factor = (e10 / e0).powf(0.1);
        assert!(factor < 0.5, "average reduction factor {factor}");
    }

    #[test]
    fn damping_serde() {
        let cfg: AmgConfig = serde_json::from_str(r#"{"prolongator_damping": 0.5}"#).unwrap();
        assert_eq!(cfg.prolongator_damping, ProlongatorDamping::Fixed(0.5));
        let cfg: AmgConfig = serde_json::from_str(r#"{"prolongator_damping": "auto"}"#).unwrap();
        assert_eq!(cfg.prolongator_damping, ProlongatorDamping::Auto);
        assert!(serde_json::from_str::<AmgConfig>(r#"{"prolongator_damping": "fast"}"#).is_err());
        let s = serde_json::to_string(&AmgConfig::default()).unwrap();
        assert!(s.contains(r#""prolongator_damping":"auto""#));
    }
}
