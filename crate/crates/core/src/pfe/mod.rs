//! Piecewise flat embedding solver.

mod config;
mod solver;
mod weighting;

pub use config::{PfeConfig, ReweightRule, BOUNDARY_RADIUS, CLUSTERING_RADIUS};
pub use solver::{
    energy, inner_step_a1, lp_energy, run_stage1, run_stage2_l11, run_stage2_l1p, shrink,
    shrink_scalar, soc_outer_step, split_bregman_inner, system_matrix, EmbeddingState,
    InnerReport, SystemKey, SOLVE_RESIDUAL_TOL,
};
pub use weighting::{residual_weighting, ResidualWeights, ETA_FLOOR};

use crate::error::{PfeError, Result};
use crate::graph::{build_m, AffinityGraph};
use crate::sparsela::{smallest_generalized_eigvecs, DenseMatrix};

/// Output of [`run_pfe`].
#[derive(Clone, Debug)]
pub struct EmbeddingResult {
    pub y: DenseMatrix,
    pub eta: Vec<f64>,
    pub y_weighted: DenseMatrix,
    pub energy_trace: Vec<f64>,
    pub channel_energy_trace: Vec<Vec<f64>>,
    pub per_channel_energy: Vec<f64>,
    /// Number of trace entries produced by stage I.
    pub stage1_len: usize,
    pub orthogonality_trace: Vec<f64>,
    pub flat_channels: Vec<usize>,
    pub rank_deficient_projections: usize,
}

/// Stage I, then stage II (L1,1 when `p == 1`, reweighted otherwise), then
/// residual weighting.
pub fn run_pfe(
    graph: &AffinityGraph,
    cfg: &PfeConfig,
    init_y: &DenseMatrix,
) -> Result<EmbeddingResult> {
    cfg.validate()?;
    if init_y.n_cols() != cfg.d {
        return Err(PfeError::Shape(format!(
            "initialization has {} channels, config asks for {}",
            init_y.n_cols(),
            cfg.d
        )));
    }
    let m = build_m(graph);
    let degrees = graph.degrees();
    let d_sqrt: Vec<f64> = degrees.iter().map(|v| v.sqrt()).collect();

    let mut state = run_stage1(&m, degrees, init_y, cfg)?;
    let stage1_len = state.energy_trace.len();
    if cfg.p == 1.0 {
        run_stage2_l11(&mut state, &m, &d_sqrt, cfg.lambda, cfg.r_stage2, cfg.stage2_iters)?;
    } else {
        run_stage2_l1p(&mut state, &m, degrees, cfg)?;
    }

    let rw = residual_weighting(&state.y, &m, degrees)?;
    let (_, per_channel_energy) = energy(&m, &state.y)?;
    Ok(EmbeddingResult {
        y: state.y,
        eta: rw.eta,
        y_weighted: rw.y_weighted,
        energy_trace: state.energy_trace,
        channel_energy_trace: state.channel_energy_trace,
        per_channel_energy,
        stage1_len,
        orthogonality_trace: state.orthogonality_trace,
        flat_channels: rw.flat_channels,
        rank_deficient_projections: state.rank_deficient_projections,
    })
}

/// Laplacian-eigenmap embedding: eigenvectors 2..=d+1 of `(D − W) y = λ D y`
/// and their eigenvalues, the constant vector dropped.
pub fn laplacian_eigenmap(graph: &AffinityGraph, d: usize) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = graph.n();
    if d + 1 > n {
        return Err(PfeError::Shape(format!("{d} eigenvectors need more than {n} pixels")));
    }
    let eig = smallest_generalized_eigvecs(&graph.laplacian(), graph.degrees(), d + 1)?;
    let vectors = DenseMatrix::from_fn(n, d, |i, j| eig.vectors[(i, j + 1)]);
    Ok((eig.values[1..].to_vec(), vectors))
}
