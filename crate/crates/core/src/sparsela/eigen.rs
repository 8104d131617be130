//! Smallest eigenpairs of the generalized problem `L y = λ D y` for graph
//! Laplacians, used by the Laplacian-eigenmap baseline and the spectral
//! initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PfeError, Result};

use super::cholesky::cholesky_factor;
use super::svd::{fix_sign, symmetric_eigen};
use super::{DenseMatrix, SparseMatrix};

/// Options for [`smallest_generalized_eigvecs_with`].
#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub max_iters: usize,
    /// Converged once `‖L y − λ D y‖_max ≤ tol · ‖L‖_max` for every returned pair.
    pub tol: f64,
    /// Extra block vectors beyond `k`; a wider block separates clustered
    /// eigenvalues faster.
    pub oversample: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            max_iters: 2000,
            tol: 1e-8,
            oversample: 8,
        }
    }
}

/// Eigenvalues in ascending order and `D`-orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
    pub iterations: usize,
}

/// The `k` eigenpairs of `L y = λ D y` with smallest eigenvalues.
pub fn smallest_generalized_eigvecs(
    l: &SparseMatrix,
    d_diag: &[f64],
    k: usize,
) -> Result<GeneralizedEigen> {
    smallest_generalized_eigvecs_with(l, d_diag, k, &EigenOptions::default())
}

/// Shifted inverse iteration on `(L + μD)⁻¹ D` with `μ = 1e-6·trace(D)/n`,
/// run as a block with `D`-orthogonalization and a Rayleigh-Ritz projection
/// after every step. The shifted matrix is factored once.
pub fn smallest_generalized_eigvecs_with(
    l: &SparseMatrix,
    d_diag: &[f64],
    k: usize,
    opts: &EigenOptions,
) -> Result<GeneralizedEigen> {
    let n = l.n_rows();
    if l.n_cols() != n || d_diag.len() != n {
        return Err(PfeError::Shape(format!(
            "Laplacian {}x{} with degree vector of length {}",
            n,
            l.n_cols(),
            d_diag.len()
        )));
    }
    if k > n || k > 32 {
        return Err(PfeError::Shape(format!("cannot take {k} eigenvectors of order {n}")));
    }
    if d_diag.iter().any(|&d| !(d > 0.0)) {
        return Err(PfeError::Shape("degree vector must be positive".into()));
    }
    if k == 0 {
        return Ok(GeneralizedEigen {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(n, 0),
            iterations: 0,
        });
    }

    let mu = 1e-6 * d_diag.iter().sum::<f64>() / n as f64;
    let shifted = l.scaled_plus_diagonal(1.0, &d_diag.iter().map(|d| mu * d).collect::<Vec<_>>())?;
    let factor = cholesky_factor(&shifted)?;
    let l_scale = l.max_abs().max(f64::MIN_POSITIVE);

    let block = (k + opts.oversample).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let mut x = DenseMatrix::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    d_orthonormalize(&mut x, d_diag);

    let mut last_residual = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        let mut z = x.clone();
        z.scale_rows(d_diag);
        let mut z = factor.solve(&z)?;
        d_orthonormalize(&mut z, d_diag);

        // Rayleigh-Ritz on span(z): zᵀDz = I, so the projected problem is standard
        let lz = l.multiply(&z)?;
        let h = z.transpose_matmul(&lz)?;
        let h = DenseMatrix::from_fn(block, block, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
        let (evals_desc, q) = symmetric_eigen(&h);
        let q_asc = DenseMatrix::from_fn(block, block, |i, j| q[(i, block - 1 - j)]);
        let values: Vec<f64> = evals_desc.iter().rev().copied().collect();
        x = z.matmul(&q_asc)?;
        let lx = lz.matmul(&q_asc)?;

        let mut residual = 0.0f64;
        for j in 0..k {
            let (xj, lxj) = (x.col(j), lx.col(j));
            for i in 0..n {
                residual = residual.max((lxj[i] - values[j] * d_diag[i] * xj[i]).abs());
            }
        }
        last_residual = residual / l_scale;
        if last_residual <= opts.tol {
            let mut vectors = DenseMatrix::from_fn(n, k, |i, j| x[(i, j)]);
            for j in 0..k {
                fix_sign(vectors.col_mut(j));
            }
            return Ok(GeneralizedEigen {
                values: values[..k].iter().map(|&v| v.max(0.0)).collect(),
                vectors,
                iterations: iter,
            });
        }
    }
    Err(PfeError::Convergence {
        iterations: opts.max_iters,
        residual: last_residual,
    })
}

/// Modified Gram-Schmidt in the `D` inner product, two passes. Columns that
/// collapse are replaced by a deterministic canonical vector.
fn d_orthonormalize(x: &mut DenseMatrix, d_diag: &[f64]) {
    let (n, m) = x.shape();
    let d_dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(d_diag).map(|((x, y), d)| x * y * d).sum()
    };
    let mut spare = 0usize;
    for j in 0..m {
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                for p in 0..j {
                    let c = d_dot(x.col(p), x.col(j));
                    let xp = x.col(p).to_vec();
                    for (v, w) in x.col_mut(j).iter_mut().zip(&xp) {
                        *v -= c * w;
                    }
                }
            }
            let nrm = d_dot(x.col(j), x.col(j)).sqrt();
            if nrm > 1e-200 && nrm.is_finite() {
                x.col_mut(j).iter_mut().for_each(|v| *v /= nrm);
                break;
            }
            attempts += 1;
            assert!(attempts <= n, "cannot complete a D-orthonormal block");
            let col = x.col_mut(j);
            col.iter_mut().for_each(|v| *v = 0.0);
            col[spare % n] = 1.0;
            spare += 1;
        }
    }
}
