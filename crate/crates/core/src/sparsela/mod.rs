//! Linear algebra kernels: CSR storage, Gram products, envelope Cholesky,
//! thin SVD / polar orthonormalization and a smallest-eigenpair routine.

mod cholesky;
mod dense;
mod eigen;
mod sparse;
mod svd;

pub use cholesky::{cholesky_factor, cholesky_factor_with_ordering, CholeskyFactor};
pub use dense::{dot, norm2, DenseMatrix};
pub use eigen::{
    smallest_generalized_eigvecs, smallest_generalized_eigvecs_with, EigenOptions,
    GeneralizedEigen,
};
pub use sparse::SparseMatrix;
pub use svd::{orthonormal_polar, symmetric_eigen, thin_svd, PolarFactor, ThinSvd, RANK_TOL};
