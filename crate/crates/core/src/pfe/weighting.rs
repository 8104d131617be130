use crate::error::{PfeError, Result};
use crate::sparsela::{norm2, DenseMatrix, SparseMatrix};

/// Smallest residual weight; flatter channels are clamped here and flagged.
pub const ETA_FLOOR: f64 = 1e-12;

/// Residual-based channel weights.
#[derive(Clone, Debug)]
pub struct ResidualWeights {
    /// `η_v = sqrt(‖M y_v‖₁ / ‖D^{1/2} y_v‖₂)`.
    pub eta: Vec<f64>,
    /// Column `v` is `(y_v / ‖y_v‖₂) / η_v`.
    pub y_weighted: DenseMatrix,
    /// Channels whose `η` fell below [`ETA_FLOOR`].
    pub flat_channels: Vec<usize>,
}

/// Down-weights channels with a large residual cost. Scale-invariant per
/// channel.
pub fn residual_weighting(
    y: &DenseMatrix,
    m: &SparseMatrix,
    degrees: &[f64],
) -> Result<ResidualWeights> {
    if y.n_rows() != degrees.len() || m.n_cols() != y.n_rows() {
        return Err(PfeError::Shape("channels, graph and degrees disagree".into()));
    }
    let my = m.multiply(y)?;
    let mut eta = Vec::with_capacity(y.n_cols());
    let mut flat_channels = Vec::new();
    let mut y_weighted = DenseMatrix::zeros(y.n_rows(), y.n_cols());
    for v in 0..y.n_cols() {
        let col = y.col(v);
        let norm = norm2(col);
        if norm == 0.0 {
            return Err(PfeError::DegenerateChannel(v));
        }
        let residual: f64 = my.col(v).iter().map(|x| x.abs()).sum();
        let d_norm = col
            .iter()
            .zip(degrees)
            .map(|(x, d)| d * x * x)
            .sum::<f64>()
            .sqrt();
        let mut e = (residual / d_norm).sqrt();
        if !(e >= ETA_FLOOR) {
            e = ETA_FLOOR;
            flat_channels.push(v);
        }
        eta.push(e);
        let scale = 1.0 / (norm * e);
        for (dst, x) in y_weighted.col_mut(v).iter_mut().zip(col) {
            *dst = x * scale;
        }
    }
    Ok(ResidualWeights {
        eta,
        y_weighted,
        flat_channels,
    })
}
