//! Compressed sparse row matrices and the products used to build multigrid
//! hierarchies.

use crate::error::{Error, Result};

/// Real CSR matrix.
///
/// Column indices are strictly increasing within each row and no duplicate
/// entries are stored. Instances are immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating every invariant.
    pub fn try_new(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidMatrix("row_offsets[0] != 0".into()));
        }
        if col_indices.len() != values.len() || row_offsets[nrows] != values.len() {
            return Err(Error::InvalidMatrix(
                "row_offsets[nrows], col_indices and values disagree on nnz".into(),
            ));
        }
        for i in 0..nrows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if hi < lo {
                return Err(Error::InvalidMatrix(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let cols = &col_indices[lo..hi];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(Error::InvalidMatrix(format!(
                        "column {c} out of range in row {i}"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::InvalidMatrix(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from unsorted triplets; duplicates are summed. Entries that sum
    /// to exactly zero are kept, matching what the caller asked for.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({i},{j}) outside {nrows}x{ncols}"
                )));
            }
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_offsets = vec![0; nrows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::try_new(nrows, ncols, row_offsets, col_indices, values)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Dense row-major input; exact zeros are not stored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged dense input");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        out
    }

    /// Iterator over stored `(row, col, value)` triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// `y = A x`
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                op: "spmv",
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without allocation. Panics on shape mismatch.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    /// `y += alpha * A x`. Panics on shape mismatch.
    pub fn spmv_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi += alpha * s;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows visited in ascending order keep each output row sorted
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let dst = next[j];
                col_indices[dst] = i;
                values[dst] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse product `self * other` (row-wise Gustavson). Entries that
    /// accumulate to exactly 0.0 are dropped.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let n = other.ncols;
        let mut acc = vec![0.0; n];
        let mut marker = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = a * b;
                        touched.push(j);
                    } else {
                        acc[j] += a * b;
                    }
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_indices.push(j);
                    values.push(acc[j]);
                }
            }
            row_offsets.push(values.len());
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// `self + alpha * other`, dropping exact zeros.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                op: "add",
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                let (j, v) = if q == bc.len() || (p < ac.len() && ac[p] < bc[q]) {
                    p += 1;
                    (ac[p - 1], av[p - 1])
                } else if p == ac.len() || bc[q] < ac[p] {
                    q += 1;
                    (bc[q - 1], alpha * bv[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ac[p - 1], av[p - 1] + alpha * bv[q - 1])
                };
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Scales row `i` by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> CsrMatrix {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.values[k] *= d[i];
            }
        }
        out
    }

    /// Extracts the rectangular sub-block `[r0, r0+nr) x [c0, c0+nc)`.
    pub fn submatrix(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> CsrMatrix {
        assert!(r0 + nr <= self.nrows && c0 + nc <= self.ncols);
        let mut row_offsets = Vec::with_capacity(nr + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in r0..r0 + nr {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= c0 && j < c0 + nc {
                    col_indices.push(j - c0);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        CsrMatrix {
            nrows: nr,
            ncols: nc,
            row_offsets,
            col_indices,
            values,
        }
    }
}

/// Galerkin triple product `R A P`.
pub fn triple_product(r: &CsrMatrix, a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    if r.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "triple_product (R*A)",
            expected: r.ncols(),
            found: a.nrows(),
        });
    }
    if a.ncols() != p.nrows() {
        return Err(Error::DimensionMismatch {
            op: "triple_product (A*P)",
            expected: a.ncols(),
            found: p.nrows(),
        });
    }
    r.matmul(a)?.matmul(p)
}

/// Diagonal matrix of absolute row sums, `D_ii = sum_j |A_ij|`.
pub fn lumped_abs_rowsum(a: &CsrMatrix) -> Result<CsrMatrix> {
    Ok(CsrMatrix::from_diagonal(&abs_rowsums(a)?))
}

pub(crate) fn abs_rowsums(a: &CsrMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "lumped_abs_rowsum",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    (0..a.nrows())
        .map(|i| {
            let s: f64 = a.row(i).1.iter().map(|v| v.abs()).sum();
            if s == 0.0 {
                Err(Error::ZeroRowSum { row: i })
            } else {
                Ok(s)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> CsrMatrix {
        CsrMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn try_new_rejects_bad_structure() {
        assert!(CsrMatrix::try_new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, &[(1, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(a.to_dense(), vec![vec![0.0, 2.0], vec![4.0, 0.0]]);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn spmv_examples() {
        let i3 = CsrMatrix::identity(3);
        assert_eq!(i3.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let z = CsrMatrix::zeros(2, 3);
        assert_eq!(z.spmv(&[4.0, 5.0, 6.0]).unwrap(), vec![0.0, 0.0]);
        let a = dense(&[&[2.0, 1.0], &[0.0, 3.0]]);
        assert_eq!(a.spmv(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(matches!(
            a.spmv(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transpose_examples() {
        assert_eq!(CsrMatrix::identity(4).transpose(), CsrMatrix::identity(4));
        let row = dense(&[&[1.0, 2.0, 3.0]]);
        let col = row.transpose();
        assert_eq!((col.nrows(), col.ncols()), (3, 1));
        assert_eq!(col.to_dense(), vec![vec![1.0], vec![2.0], vec![3.0]]);
        let a = dense(&[&[0.0, 5.0], &[7.0, 0.0]]);
        assert_eq!(
            a.transpose().to_dense(),
            vec![vec![0.0, 7.0], vec![5.0, 0.0]]
        );
    }

    #[test]
    fn matmul_examples() {
        let a = dense(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.matmul(&CsrMatrix::identity(2)).unwrap(), a);
        let z = a.matmul(&CsrMatrix::zeros(2, 2)).unwrap();
        assert_eq!(z.nnz(), 0);
        let ones = dense(&[&[1.0], &[1.0]]);
        assert_eq!(
            a.matmul(&ones).unwrap().to_dense(),
            vec![vec![3.0], vec![7.0]]
        );
        assert!(a.matmul(&CsrMatrix::identity(3)).is_err());
    }

    #[test]
    fn matmul_drops_exact_cancellation() {
        let a = dense(&[&[1.0, -1.0]]);
        let b = dense(&[&[1.0], &[1.0]]);
        assert_eq!(a.matmul(&b).unwrap().nnz(), 0);
    }

    #[test]
    fn triple_product_examples() {
        let a = dense(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let i2 = CsrMatrix::identity(2);
        assert_eq!(triple_product(&i2, &a, &i2).unwrap(), a);
        let r = dense(&[&[1.0, 1.0]]);
        let p = r.transpose();
        assert_eq!(
            triple_product(&r, &a, &p).unwrap().to_dense(),
            vec![vec![10.0]]
        );
        let pz = CsrMatrix::zeros(2, 1);
        assert_eq!(triple_product(&r, &a, &pz).unwrap().nnz(), 0);
        assert!(triple_product(&a, &r, &p).is_err());
    }

    #[test]
    fn lumped_abs_rowsum_examples() {
        assert_eq!(
            lumped_abs_rowsum(&CsrMatrix::identity(3)).unwrap(),
            CsrMatrix::identity(3)
        );
        let a = dense(&[&[2.0, -1.0], &[-1.0, 2.0]]);
        assert_eq!(lumped_abs_rowsum(&a).unwrap().diagonal(), vec![3.0, 3.0]);
        let z = dense(&[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(matches!(
            lumped_abs_rowsum(&z),
            Err(Error::ZeroRowSum { row: 0 })
        ));
    }

    #[test]
    fn add_and_submatrix() {
        let a = dense(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let d = a.add_scaled(-1.0, &a).unwrap();
        assert_eq!(d.nnz(), 0);
        let s = a.add_scaled(2.0, &CsrMatrix::identity(2)).unwrap();
        assert_eq!(s.to_dense(), vec![vec![3.0, 2.0], vec![3.0, 6.0]]);
        assert_eq!(a.submatrix(1, 1, 0, 2).to_dense(), vec![vec![3.0, 4.0]]);
        assert_eq!(
            a.scale_rows(&[2.0, 0.5]).to_dense(),
            vec![vec![2.0, 4.0], vec![1.5, 2.0]]
        );
    }
}
