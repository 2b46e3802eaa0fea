//! N×N block matrices over a field layout.
//!
//! A coupled system stores one optional CSR block per field pair. An absent
//! block is an exact structural zero and is distinct from a stored block of
//! zeros; preconditioner builders branch on absence.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtx;
use crate::sparse::CsrMatrix;

/// Partition of a monolithic index range into contiguous field segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl FieldLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::LayoutMismatch(
                "layout needs at least one field".into(),
            ));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::LayoutMismatch(format!("field {i} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self { sizes, offsets })
    }

    pub fn n_fields(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, field: usize) -> usize {
        self.sizes[field]
    }

    pub fn offset(&self, field: usize) -> usize {
        self.offsets[field]
    }

    pub fn total(&self) -> usize {
        self.offsets[self.sizes.len()]
    }

    pub fn range(&self, field: usize) -> std::ops::Range<usize> {
        self.offsets[field]..self.offsets[field + 1]
    }

    /// Layout of the selected fields, concatenated in the given order.
    pub fn select(&self, fields: &[usize]) -> Result<Self> {
        Self::new(fields.iter().map(|&f| self.sizes[f]).collect())
    }

    /// Monolithic index map for a regrouping: entry `k` of the result is the
    /// original index that lands at position `k` once the groups' fields are
    /// concatenated in order.
    pub fn permutation(&self, groups: &[Vec<usize>]) -> Vec<usize> {
        groups
            .iter()
            .flatten()
            .flat_map(|&f| self.range(f))
            .collect()
    }
}

/// Checks that `groups` is an ordered partition of `0..n` into nonempty groups.
pub fn validate_partition(groups: &[Vec<usize>], n: usize) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::InvalidPartition("no groups given".into()));
    }
    let mut seen = vec![false; n];
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::InvalidPartition(format!("group {g} is empty")));
        }
        for &f in group {
            if f >= n {
                return Err(Error::InvalidPartition(format!(
                    "field {f} out of range for a {n}-field system"
                )));
            }
            if seen[f] {
                return Err(Error::InvalidPartition(format!("field {f} appears twice")));
            }
            seen[f] = true;
        }
    }
    if let Some(f) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!(
            "field {f} missing from groups"
        )));
    }
    Ok(())
}

/// Vector split into per-field segments.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    layout: FieldLayout,
    segments: Vec<Vec<f64>>,
}

impl BlockVector {
    pub fn zeros(layout: &FieldLayout) -> Self {
        Self {
            segments: layout.sizes().iter().map(|&s| vec![0.0; s]).collect(),
            layout: layout.clone(),
        }
    }

    pub fn from_segments(layout: &FieldLayout, segments: Vec<Vec<f64>>) -> Result<Self> {
        if segments.len() != layout.n_fields() {
            return Err(Error::LayoutMismatch(format!(
                "{} segments for a {}-field layout",
                segments.len(),
                layout.n_fields()
            )));
        }
        for (i, s) in segments.iter().enumerate() {
            if s.len() != layout.size(i) {
                return Err(Error::LayoutMismatch(format!(
                    "segment {i} has length {}, field size is {}",
                    s.len(),
                    layout.size(i)
                )));
            }
        }
        Ok(Self {
            layout: layout.clone(),
            segments,
        })
    }

    /// Splits a monolithic vector according to `layout`.
    pub fn gather(x: &[f64], layout: &FieldLayout) -> Result<Self> {
        if x.len() != layout.total() {
            return Err(Error::DimensionMismatch {
                op: "gather",
                expected: layout.total(),
                found: x.len(),
            });
        }
        Ok(Self {
            segments: (0..layout.n_fields())
                .map(|i| x[layout.range(i)].to_vec())
                .collect(),
            layout: layout.clone(),
        })
    }

    /// Concatenates the segments into a monolithic vector.
    pub fn scatter(&self) -> Vec<f64> {
        self.segments.concat()
    }

    pub fn layout(&self) -> &FieldLayout {
        &self.layout
    }

    pub fn segment(&self, i: usize) -> &[f64] {
        &self.segments[i]
    }

    pub fn segments(&self) -> &[Vec<f64>] {
        &self.segments
    }
}

/// N×N grid of optional CSR blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    rows: FieldLayout,
    cols: FieldLayout,
    blocks: Vec<Option<CsrMatrix>>,
}

impl BlockMatrix {
    /// `blocks` is row-major with `N*N` entries.
    pub fn new(
        rows: FieldLayout,
        cols: FieldLayout,
        blocks: Vec<Option<CsrMatrix>>,
    ) -> Result<Self> {
        let n = rows.n_fields();
        if cols.n_fields() != n {
            return Err(Error::LayoutMismatch(format!(
                "{n} row fields but {} column fields",
                cols.n_fields()
            )));
        }
        if blocks.len() != n * n {
            return Err(Error::LayoutMismatch(format!(
                "{} blocks given for a {n}x{n} block matrix",
                blocks.len()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            if let Some(b) = b {
                let (i, j) = (k / n, k % n);
                if b.nrows() != rows.size(i) || b.ncols() != cols.size(j) {
                    return Err(Error::LayoutMismatch(format!(
                        "block ({i},{j}) is {}x{}, layout expects {}x{}",
                        b.nrows(),
                        b.ncols(),
                        rows.size(i),
                        cols.size(j)
                    )));
                }
            }
        }
        Ok(Self { rows, cols, blocks })
    }

    /// Square block matrix with identical row and column layouts.
    pub fn square(layout: FieldLayout, blocks: Vec<Option<CsrMatrix>>) -> Result<Self> {
        Self::new(layout.clone(), layout, blocks)
    }

    /// Wraps a single matrix as a one-field system.
    pub fn single(a: CsrMatrix) -> Result<Self> {
        let rows = FieldLayout::new(vec![a.nrows()])?;
        let cols = FieldLayout::new(vec![a.ncols()])?;
        Self::new(rows, cols, vec![Some(a)])
    }

    pub fn n_fields(&self) -> usize {
        self.rows.n_fields()
    }

    pub fn row_layout(&self) -> &FieldLayout {
        &self.rows
    }

    pub fn col_layout(&self) -> &FieldLayout {
        &self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&CsrMatrix> {
        self.blocks[i * self.n_fields() + j].as_ref()
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().flatten().map(|b| b.nnz()).sum()
    }

    /// `y_i = sum_j A_ij x_j`, accumulated in ascending `j`.
    pub fn block_apply(&self, x: &BlockVector) -> Result<BlockVector> {
        if x.layout() != &self.cols {
            return Err(Error::LayoutMismatch(
                "vector layout differs from the column layout".into(),
            ));
        }
        let mut y = vec![0.0; self.rows.total()];
        self.apply_flat(&x.scatter(), &mut y);
        BlockVector::gather(&y, &self.rows)
    }

    /// Monolithic-vector form of [`block_apply`](Self::block_apply). Panics on
    /// length mismatch.
    pub fn apply_flat(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols.total());
        assert_eq!(y.len(), self.rows.total());
        y.fill(0.0);
        let n = self.n_fields();
        for i in 0..n {
            let yi = &mut y[self.rows.range(i)];
            for j in 0..n {
                if let Some(b) = self.block(i, j) {
                    b.spmv_add(1.0, &x[self.cols.range(j)], yi);
                }
            }
        }
    }

    /// `r = b - A x` on monolithic vectors.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.rows.total()];
        self.apply_flat(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    /// Places block `(i,j)` at row offset `i`, column offset `j`.
    pub fn flatten(&self) -> CsrMatrix {
        let n = self.n_fields();
        let nrows = self.rows.total();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..n {
            for r in 0..self.rows.size(i) {
                for j in 0..n {
                    if let Some(b) = self.block(i, j) {
                        let off = self.cols.offset(j);
                        let (cols, vals) = b.row(r);
                        col_indices.extend(cols.iter().map(|c| c + off));
                        values.extend_from_slice(vals);
                    }
                }
                row_offsets.push(values.len());
            }
        }
        CsrMatrix::try_new(nrows, self.cols.total(), row_offsets, col_indices, values)
            .expect("flatten preserves CSR invariants")
    }

    /// The sub-system restricted to `fields`, in the given order.
    pub fn subsystem(&self, fields: &[usize]) -> Result<BlockMatrix> {
        let n = self.n_fields();
        if let Some(&f) = fields.iter().find(|&&f| f >= n) {
            return Err(Error::InvalidPartition(format!("field {f} out of range")));
        }
        let mut blocks = Vec::with_capacity(fields.len() * fields.len());
        for &fi in fields {
            for &fj in fields {
                blocks.push(self.block(fi, fj).cloned());
            }
        }
        BlockMatrix::new(self.rows.select(fields)?, self.cols.select(fields)?, blocks)
    }

    /// Concatenation of the blocks `(fi, fj)` for `fi` in `row_fields`,
    /// `fj` in `col_fields`; `None` when all constituents are absent.
    pub fn concat_blocks(&self, row_fields: &[usize], col_fields: &[usize]) -> Option<CsrMatrix> {
        if row_fields
            .iter()
            .all(|&i| col_fields.iter().all(|&j| self.block(i, j).is_none()))
        {
            return None;
        }
        let nrows: usize = row_fields.iter().map(|&i| self.rows.size(i)).sum();
        let ncols: usize = col_fields.iter().map(|&j| self.cols.size(j)).sum();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for &fi in row_fields {
            for r in 0..self.rows.size(fi) {
                let mut off = 0;
                for &fj in col_fields {
                    if let Some(b) = self.block(fi, fj) {
                        let (cols, vals) = b.row(r);
                        col_indices.extend(cols.iter().map(|c| c + off));
                        values.extend_from_slice(vals);
                    }
                    off += self.cols.size(fj);
                }
                row_offsets.push(values.len());
            }
        }
        Some(
            CsrMatrix::try_new(nrows, ncols, row_offsets, col_indices, values)
                .expect("concatenation preserves CSR invariants"),
        )
    }

    /// Regroups fields into `groups.len()` merged fields. Group `I`'s fields
    /// are concatenated in the order given.
    pub fn merge(&self, groups: &[Vec<usize>]) -> Result<BlockMatrix> {
        validate_partition(groups, self.n_fields())?;
        let m = groups.len();
        let row_sizes = groups
            .iter()
            .map(|g| g.iter().map(|&f| self.rows.size(f)).sum())
            .collect();
        let col_sizes = groups
            .iter()
            .map(|g| g.iter().map(|&f| self.cols.size(f)).sum())
            .collect();
        let mut blocks = Vec::with_capacity(m * m);
        for gi in groups {
            for gj in groups {
                blocks.push(self.concat_blocks(gi, gj));
            }
        }
        BlockMatrix::new(
            FieldLayout::new(row_sizes)?,
            FieldLayout::new(col_sizes)?,
            blocks,
        )
    }
}

/// On-disk description of a block system.
///
/// Field indices in file names are 0-based (`A_0_1.mtx` is the block coupling
/// field 0's equations to field 1's unknowns); entries inside each Matrix
/// Market file stay 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub n_fields: usize,
    pub field_sizes: Vec<usize>,
    /// Present blocks as `[row, col]` pairs.
    pub blocks: Vec<[usize; 2]>,
    /// Whether `b_<i>.mtx` files accompany the system.
    #[serde(default)]
    pub rhs: bool,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn block_file_name(i: usize, j: usize) -> String {
    format!("A_{i}_{j}.mtx")
}

pub fn rhs_file_name(i: usize) -> String {
    format!("b_{i}.mtx")
}

/// Writes `manifest.json`, one `A_i_j.mtx` per present block and optional
/// `b_i.mtx` files into `dir`. Returns the manifest path.
pub fn write_system(dir: &Path, a: &BlockMatrix, b: Option<&BlockVector>) -> Result<PathBuf> {
    if !a.is_square() {
        return Err(Error::LayoutMismatch(
            "only square block systems can be exported".into(),
        ));
    }
    fs::create_dir_all(dir)?;
    let n = a.n_fields();
    let mut present = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if let Some(blk) = a.block(i, j) {
                mtx::write_matrix(&dir.join(block_file_name(i, j)), blk)?;
                present.push([i, j]);
            }
        }
    }
    if let Some(b) = b {
        if b.layout() != a.row_layout() {
            return Err(Error::LayoutMismatch(
                "right-hand side layout differs from system".into(),
            ));
        }
        for i in 0..n {
            mtx::write_vector(&dir.join(rhs_file_name(i)), b.segment(i))?;
        }
    }
    let manifest = Manifest {
        n_fields: n,
        field_sizes: a.row_layout().sizes().to_vec(),
        blocks: present,
        rhs: b.is_some(),
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// Reads a system written by [`write_system`]. Block files are resolved
/// relative to the manifest's directory.
pub fn read_system(manifest_path: &Path) -> Result<(BlockMatrix, Option<BlockVector>)> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    if manifest.field_sizes.len() != manifest.n_fields {
        return Err(Error::LayoutMismatch(format!(
            "manifest lists {} field sizes for n_fields = {}",
            manifest.field_sizes.len(),
            manifest.n_fields
        )));
    }
    let layout = FieldLayout::new(manifest.field_sizes.clone())?;
    let n = manifest.n_fields;
    let mut blocks = vec![None; n * n];
    for &[i, j] in &manifest.blocks {
        if i >= n || j >= n {
            return Err(Error::LayoutMismatch(format!(
                "block ({i},{j}) out of range"
            )));
        }
        blocks[i * n + j] = Some(mtx::read_matrix(&dir.join(block_file_name(i, j)))?);
    }
    let a = BlockMatrix::square(layout.clone(), blocks)?;
    let b = if manifest.rhs {
        let segs = (0..n)
            .map(|i| mtx::read_vector(&dir.join(rhs_file_name(i))))
            .collect::<Result<Vec<_>>>()?;
        Some(BlockVector::from_segments(&layout, segs)?)
    } else {
        None
    };
    Ok((a, b))
}
