use crate::error::{PfeError, Result};

use super::DenseMatrix;

/// Compressed sparse row matrix.
///
/// Invariants: `row_offsets` is non-decreasing and ends at `values.len()`,
/// column indices are strictly increasing within a row, and no stored value is
/// exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and entries that cancel to zero are dropped.
    pub fn from_triplets(
        triplets: &[(usize, usize, f64)],
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(PfeError::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
        }

        // counting sort by row keeps insertion order within a row, then a
        // per-row sort by column
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut by_row = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            by_row[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for i in 0..n_rows {
            let row = &mut by_row[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_indices.push(c);
                    values.push(sum);
                }
            }
            row_offsets.push(values.len());
        }

        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Assembles a matrix from rows that are already sorted and zero-free.
    pub(crate) fn from_sorted_rows(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_offsets.len(), n_rows + 1);
        debug_assert_eq!(*row_offsets.last().unwrap(), values.len());
        debug_assert_eq!(col_indices.len(), values.len());
        SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
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
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Sparse-dense product `self * x`.
    pub fn multiply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != x.n_rows() {
            return Err(PfeError::Shape(format!(
                "cannot multiply {}x{} sparse by {}x{} dense",
                self.n_rows,
                self.n_cols,
                x.n_rows(),
                x.n_cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, x.n_cols());
        for v in 0..x.n_cols() {
            let xv = x.col(v);
            let dst = out.col_mut(v);
            for (i, o) in dst.iter_mut().enumerate() {
                let (cols, vals) = self.row(i);
                *o = cols.iter().zip(vals).map(|(&j, &a)| a * xv[j]).sum();
            }
        }
        Ok(out)
    }

    /// `selfᵀ * z` without forming the transpose. Contributions to each output
    /// entry are accumulated in row order.
    pub fn multiply_transpose(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != z.n_rows() {
            return Err(PfeError::Shape(format!(
                "cannot form Aᵀz for {}x{} sparse and {}x{} dense",
                self.n_rows,
                self.n_cols,
                z.n_rows(),
                z.n_cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.n_cols, z.n_cols());
        for v in 0..z.n_cols() {
            let zv = z.col(v);
            let dst = out.col_mut(v);
            for (i, &zi) in zv.iter().enumerate() {
                let (cols, vals) = self.row(i);
                for (&j, &a) in cols.iter().zip(vals) {
                    dst[j] += a * zi;
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ self`.
    ///
    /// For the edge-difference matrix this is the weighted Laplacian with
    /// squared weights: `S_ii = Σ_j W_ij²`, `S_ij = −W_ij²`.
    pub fn gram(&self) -> SparseMatrix {
        let mut triplets = Vec::new();
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&a, &va) in cols.iter().zip(vals) {
                for (&b, &vb) in cols.iter().zip(vals) {
                    triplets.push((a, b, va * vb));
                }
            }
        }
        Self::from_triplets(&triplets, self.n_cols, self.n_cols)
            .expect("gram indices are in range by construction")
    }

    /// Returns a copy with row `i` multiplied by `s[i]`; rows scaled to zero
    /// are emptied.
    pub fn scale_rows(&self, s: &[f64]) -> SparseMatrix {
        assert_eq!(s.len(), self.n_rows);
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for (i, &f) in s.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let x = v * f;
                if x != 0.0 {
                    col_indices.push(j);
                    values.push(x);
                }
            }
            row_offsets.push(values.len());
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// `scale * self + diag(diag)` for a square matrix.
    pub fn scaled_plus_diagonal(&self, scale: f64, diag: &[f64]) -> Result<SparseMatrix> {
        if self.n_rows != self.n_cols || diag.len() != self.n_rows {
            return Err(PfeError::Shape(format!(
                "diagonal of length {} for a {}x{} matrix",
                diag.len(),
                self.n_rows,
                self.n_cols
            )));
        }
        let mut triplets: Vec<(usize, usize, f64)> =
            self.triplets().map(|(i, j, v)| (i, j, scale * v)).collect();
        triplets.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
        Self::from_triplets(&triplets, self.n_rows, self.n_cols)
    }

    /// Symmetric permutation `P A Pᵀ` where row `k` of the result is row
    /// `perm[k]` of `self`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<SparseMatrix> {
        if self.n_rows != self.n_cols || perm.len() != self.n_rows {
            return Err(PfeError::Shape("symmetric permutation needs a square matrix".into()));
        }
        let mut inverse = vec![usize::MAX; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inverse[p] != usize::MAX {
                return Err(PfeError::Shape("not a permutation".into()));
            }
            inverse[p] = k;
        }
        let triplets: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (inverse[i], inverse[j], v))
            .collect();
        Self::from_triplets(&triplets, self.n_rows, self.n_cols)
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }
}
