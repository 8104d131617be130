//! Envelope (skyline) Cholesky factorization of sparse SPD matrices.
//!
//! Pixel-grid Laplacians are banded under row-major pixel order, and the
//! Cholesky factor of a matrix never fills outside its row envelope, so the
//! factorization works on dense row segments `[first_j, i]` and the result is
//! stored back as CSR.

use crate::error::{PfeError, Result};

use super::dense::dot;
use super::{DenseMatrix, SparseMatrix};

/// Lower-triangular factor `Λ` with `Λ Λᵀ = A` (or `P A Pᵀ` when a
/// permutation is attached).
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lower: SparseMatrix,
    n: usize,
    /// Row `k` of the factored matrix is row `perm[k]` of the original.
    perm: Option<Vec<usize>>,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &SparseMatrix {
        &self.lower
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        self.perm.as_deref()
    }

    /// Solves `A X = rhs` by forward then backward substitution.
    ///
    /// Columns are processed together row by row, but each column sees the
    /// same operation sequence as a single-column solve, so results do not
    /// depend on how many right-hand sides are batched.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if rhs.n_rows() != self.n {
            return Err(PfeError::Shape(format!(
                "factor of order {} cannot solve a {}x{} right-hand side",
                self.n,
                rhs.n_rows(),
                rhs.n_cols()
            )));
        }
        let n = self.n;
        let m = rhs.n_cols();
        if m == 0 {
            return Ok(rhs.clone());
        }

        // row-interleaved work buffer: x[i * m + c]
        let mut x = vec![0.0; n * m];
        for c in 0..m {
            let col = rhs.col(c);
            for i in 0..n {
                let src = match &self.perm {
                    Some(p) => p[i],
                    None => i,
                };
                x[i * m + c] = col[src];
            }
        }

        let l = &self.lower;
        let mut acc = vec![0.0; m];
        for i in 0..n {
            let (cols, vals) = l.row(i);
            let (diag, off) = vals.split_last().expect("factor rows hold a diagonal");
            acc.copy_from_slice(&x[i * m..(i + 1) * m]);
            for (&j, &lij) in cols[..off.len()].iter().zip(off) {
                let xj = &x[j * m..(j + 1) * m];
                for (a, b) in acc.iter_mut().zip(xj) {
                    *a -= lij * b;
                }
            }
            for (dst, a) in x[i * m..(i + 1) * m].iter_mut().zip(&acc) {
                *dst = a / diag;
            }
        }
        for i in (0..n).rev() {
            let (cols, vals) = l.row(i);
            let (diag, off) = vals.split_last().expect("factor rows hold a diagonal");
            for k in 0..m {
                x[i * m + k] /= diag;
            }
            let (head, tail) = x.split_at_mut(i * m);
            let xi = &tail[..m];
            for (&j, &lij) in cols[..off.len()].iter().zip(off) {
                for (a, b) in head[j * m..(j + 1) * m].iter_mut().zip(xi) {
                    *a -= lij * b;
                }
            }
        }

        let mut out = DenseMatrix::zeros(n, m);
        for c in 0..m {
            let col = out.col_mut(c);
            for i in 0..n {
                let dst = match &self.perm {
                    Some(p) => p[i],
                    None => i,
                };
                col[dst] = x[i * m + c];
            }
        }
        Ok(out)
    }
}

/// Factors a symmetric positive definite matrix. Only the lower triangle of
/// `a` is read.
pub fn cholesky_factor(a: &SparseMatrix) -> Result<CholeskyFactor> {
    let lower = envelope_cholesky(a)?;
    Ok(CholeskyFactor {
        n: a.n_rows(),
        lower,
        perm: None,
    })
}

/// Factors `P A Pᵀ` for a caller-supplied ordering (row `k` of the permuted
/// matrix is row `perm[k]` of `a`). `solve` undoes the permutation.
pub fn cholesky_factor_with_ordering(a: &SparseMatrix, perm: Vec<usize>) -> Result<CholeskyFactor> {
    let permuted = a.permute_symmetric(&perm)?;
    let lower = envelope_cholesky(&permuted).map_err(|e| match e {
        PfeError::NotPositiveDefinite { index, pivot } => PfeError::NotPositiveDefinite {
            index: perm[index],
            pivot,
        },
        other => other,
    })?;
    Ok(CholeskyFactor {
        n: a.n_rows(),
        lower,
        perm: Some(perm),
    })
}

fn envelope_cholesky(a: &SparseMatrix) -> Result<SparseMatrix> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(PfeError::Shape(format!(
            "Cholesky needs a square matrix, got {}x{}",
            n,
            a.n_cols()
        )));
    }

    // first[i]: leftmost column in row i's lower envelope
    let mut first = Vec::with_capacity(n);
    for i in 0..n {
        let (cols, _) = a.row(i);
        first.push(cols.first().map_or(i, |&c| c.min(i)));
    }
    let mut start = Vec::with_capacity(n + 1);
    start.push(0usize);
    for i in 0..n {
        start.push(start[i] + (i - first[i] + 1));
    }
    let mut env = vec![0.0; start[n]];

    for i in 0..n {
        let fi = first[i];
        let base = start[i];
        {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    break;
                }
                env[base + (j - fi)] = v;
            }
        }
        let (done, row) = env.split_at_mut(base);
        let row = &mut row[..i - fi + 1];
        for j in fi..i {
            let fj = first[j];
            let lo = fi.max(fj);
            let rj = &done[start[j]..start[j + 1]];
            let s = dot(&row[lo - fi..j - fi], &rj[lo - fj..j - fj]);
            let ljj = rj[j - fj];
            row[j - fi] = (row[j - fi] - s) / ljj;
        }
        let s = dot(&row[..i - fi], &row[..i - fi]);
        let pivot = row[i - fi] - s;
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(PfeError::NotPositiveDefinite { index: i, pivot });
        }
        row[i - fi] = pivot.sqrt();
    }

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for i in 0..n {
        let fi = first[i];
        for (k, &v) in env[start[i]..start[i + 1]].iter().enumerate() {
            if v != 0.0 {
                col_indices.push(fi + k);
                values.push(v);
            }
        }
        row_offsets.push(values.len());
    }
    Ok(SparseMatrix::from_sorted_rows(n, n, row_offsets, col_indices, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(rows: &[&[f64]]) -> SparseMatrix {
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                t.push((i, j, v));
            }
        }
        SparseMatrix::from_triplets(&t, rows.len(), rows.len()).unwrap()
    }

    #[test]
    fn two_by_two_by_hand() {
        let f = cholesky_factor(&sp(&[&[4.0, 1.0], &[1.0, 3.0]])).unwrap();
        let l = f.lower().to_dense();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(0, 1)], 0.0);
        assert_eq!(l[(1, 0)], 0.5);
        assert!((l[(1, 1)] - 2.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_factor_is_identity() {
        let f = cholesky_factor(&SparseMatrix::identity(5)).unwrap();
        assert_eq!(f.lower(), &SparseMatrix::identity(5));
    }

    #[test]
    fn solve_by_hand() {
        let f = cholesky_factor(&sp(&[&[4.0, 1.0], &[1.0, 3.0]])).unwrap();
        let x = f.solve(&DenseMatrix::from_rows(&[&[1.0], &[2.0]])).unwrap();
        assert!((x[(0, 0)] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[(1, 0)] - 7.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let f = cholesky_factor(&sp(&[&[4.0, 1.0], &[1.0, 3.0]])).unwrap();
        let x = f.solve(&DenseMatrix::zeros(2, 3)).unwrap();
        assert_eq!(x.max_abs(), 0.0);
    }

    #[test]
    fn indefinite_reports_failing_row() {
        let err = cholesky_factor(&sp(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap_err();
        assert!(matches!(err, PfeError::NotPositiveDefinite { index: 1, .. }));
    }

    #[test]
    fn shape_mismatch_on_solve() {
        let f = cholesky_factor(&SparseMatrix::identity(3)).unwrap();
        assert!(f.solve(&DenseMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn ordering_hook_gives_same_solution() {
        let a = sp(&[&[4.0, 1.0, 0.0], &[1.0, 5.0, 2.0], &[0.0, 2.0, 6.0]]);
        let b = DenseMatrix::from_rows(&[&[1.0, 0.0], &[2.0, 1.0], &[3.0, -1.0]]);
        let plain = cholesky_factor(&a).unwrap().solve(&b).unwrap();
        let permuted = cholesky_factor_with_ordering(&a, vec![2, 0, 1])
            .unwrap()
            .solve(&b)
            .unwrap();
        assert!(plain.max_abs_diff(&permuted) < 1e-14);
    }

    #[test]
    fn batched_columns_match_single_column_bitwise() {
        let a = sp(&[&[4.0, 1.0, 0.5], &[1.0, 5.0, 2.0], &[0.5, 2.0, 6.0]]);
        let f = cholesky_factor(&a).unwrap();
        let b = DenseMatrix::from_rows(&[&[1.0, 0.3], &[2.0, -1.7], &[3.0, 0.9]]);
        let both = f.solve(&b).unwrap();
        for c in 0..2 {
            let single = DenseMatrix::from_columns(3, &[b.col(c).to_vec()]).unwrap();
            let x = f.solve(&single).unwrap();
            assert_eq!(x.col(0), both.col(c));
        }
    }
}
