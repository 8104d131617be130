//! Thin SVD of tall-skinny matrices through the eigen-decomposition of the
//! small Gram matrix, and the orthonormal polar factor built from it.

use super::dense::{dot, norm2};
use super::DenseMatrix;

/// Singular values below `RANK_TOL * sigma_1` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// `a = u · diag(sigma) · vᵀ` with `u` n×d, `v` d×d.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    /// Number of singular values above the rank tolerance.
    pub rank: usize,
}

/// Result of [`orthonormal_polar`] together with a rank diagnostic.
#[derive(Clone, Debug)]
pub struct PolarFactor {
    pub p: DenseMatrix,
    /// Columns of `u` that had to be completed from the orthogonal complement.
    pub completed_directions: usize,
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and eigenvectors as columns.
/// Each eigenvector's largest-magnitude entry is made positive.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.n_rows();
    assert_eq!(n, a.n_cols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);

    let scale = m.max_abs();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    for j in 0..n {
        fix_sign(vectors.col_mut(j));
    }
    (values, vectors)
}

/// Flips `x` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(x: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &v in x.iter() {
        if v.abs() > best {
            best = v.abs();
            sign = v.signum();
        }
    }
    if sign < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Thin SVD of an n×d matrix with `d ≤ n`.
///
/// Rank-deficient directions get `sigma = 0` and a left singular vector
/// completed from the orthogonal complement of the others.
pub fn thin_svd(a: &DenseMatrix) -> ThinSvd {
    let (n, d) = a.shape();
    assert!(d <= n, "thin_svd needs d <= n, got {n}x{d}");

    let gram = a.transpose_matmul(a).expect("shapes conform");
    let (evals, v) = symmetric_eigen(&gram);
    let sigma: Vec<f64> = evals.iter().map(|&e| e.max(0.0).sqrt()).collect();
    let tol = sigma.first().copied().unwrap_or(0.0) * RANK_TOL;
    let rank = sigma.iter().filter(|&&s| s > tol && s > 0.0).count();

    let av = a.matmul(&v).expect("shapes conform");
    let mut u = DenseMatrix::zeros(n, d);
    for j in 0..rank {
        let inv = 1.0 / sigma[j];
        for (dst, src) in u.col_mut(j).iter_mut().zip(av.col(j)) {
            *dst = src * inv;
        }
    }
    if rank > 0 {
        reorthonormalize_leading(&mut u, rank);
    }
    complete_basis(&mut u, rank);

    let sigma = sigma
        .into_iter()
        .enumerate()
        .map(|(j, s)| if j < rank { s } else { 0.0 })
        .collect();
    ThinSvd { u, sigma, v, rank }
}

/// Second Gram pass on the first `k` columns: `U ← U (UᵀU)^{-1/2}`.
///
/// Forming `aᵀa` squares the condition number; one extra pass brings the
/// columns back to orthonormal at working precision.
fn reorthonormalize_leading(u: &mut DenseMatrix, k: usize) {
    let n = u.n_rows();
    let lead = DenseMatrix::from_fn(n, k, |i, j| u[(i, j)]);
    let g = lead.transpose_matmul(&lead).expect("shapes conform");
    let (evals, q) = symmetric_eigen(&g);
    if evals.iter().any(|&e| !(e > 0.0)) {
        return;
    }
    let inv_sqrt = DenseMatrix::from_fn(k, k, |i, j| {
        (0..k).map(|l| q[(i, l)] * q[(j, l)] / evals[l].sqrt()).sum()
    });
    let fixed = lead.matmul(&inv_sqrt).expect("shapes conform");
    for j in 0..k {
        u.col_mut(j).copy_from_slice(fixed.col(j));
    }
}

/// Fills columns `from..d` with orthonormal vectors by Gram-Schmidt on the
/// canonical basis `e_0, e_1, …`.
fn complete_basis(u: &mut DenseMatrix, from: usize) {
    let (n, d) = u.shape();
    let mut candidate = 0;
    for j in from..d {
        loop {
            assert!(candidate < n, "ran out of canonical basis vectors");
            let mut x = vec![0.0; n];
            x[candidate] = 1.0;
            candidate += 1;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for k in 0..j {
                    let c = dot(&x, u.col(k));
                    for (xi, ui) in x.iter_mut().zip(u.col(k)) {
                        *xi -= c * ui;
                    }
                }
            }
            let nrm = norm2(&x);
            if nrm > 1e-8 {
                for (dst, xi) in u.col_mut(j).iter_mut().zip(&x) {
                    *dst = xi / nrm;
                }
                break;
            }
        }
    }
}

/// Orthonormal polar factor `P = U Vᵀ` of an n×d matrix: the closest matrix
/// with orthonormal columns in the Frobenius norm.
pub fn orthonormal_polar(a: &DenseMatrix) -> PolarFactor {
    let svd = thin_svd(a);
    let p = svd
        .u
        .matmul(&svd.v.transpose())
        .expect("shapes conform");
    PolarFactor {
        p,
        completed_directions: a.n_cols() - svd.rank,
    }
}
