//! Piecewise flat embeddings of images and clustering-based segmentation.

// `!(x > 0.0)` is used on purpose to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod init;
pub mod io;
pub mod pfe;
pub mod segment;
pub mod sparsela;

pub use error::{PfeError, Result};
