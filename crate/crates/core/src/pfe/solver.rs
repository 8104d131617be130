//! Nested Bregman iterations for the orthogonality-constrained L1 problem.
//!
//! The outer loop (splitting of the orthogonality constraint) alternates a
//! penalized L1 solve for `Y`, a polar projection for `P` and a dual update
//! for `B`. The penalized L1 solve is itself a Split Bregman loop over the
//! auxiliaries `C ≈ MY` and `E`.

use crate::error::{PfeError, Result};
use crate::sparsela::{
    cholesky_factor, orthonormal_polar, CholeskyFactor, DenseMatrix, SparseMatrix,
};

use super::config::{PfeConfig, ReweightRule};
use super::weighting::residual_weighting;

/// Relative residual bound checked after each linear solve in debug mode.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Identifies the system matrix `L = λ·M̂ᵀM̂ + r·D` a factor belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemKey {
    pub lambda: f64,
    pub r: f64,
    /// Fingerprint of the row weights of `M̂`; `None` for unit weights.
    pub weights: Option<u64>,
}

/// Mutable solver state of one embedding run.
#[derive(Clone, Debug)]
pub struct EmbeddingState {
    pub y: DenseMatrix,
    pub p_mat: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub e: DenseMatrix,
    factor: CholeskyFactor,
    system: SparseMatrix,
    key: SystemKey,
    /// `‖MY‖₁,₁` after every inner iteration.
    pub energy_trace: Vec<f64>,
    /// Per-channel split of each `energy_trace` entry.
    pub channel_energy_trace: Vec<Vec<f64>>,
    /// `‖PᵀP − I‖_max` after every outer projection.
    pub orthogonality_trace: Vec<f64>,
    /// Polar projections that hit a rank-deficient input.
    pub rank_deficient_projections: usize,
    pub inner_tol: f64,
    pub check_residuals: bool,
}

/// Outcome of a run of inner iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InnerReport {
    pub iterations: usize,
    pub converged: bool,
}

impl EmbeddingState {
    /// Starts from `init_y` with `P = polar(D^{1/2} init_y)`, `B = C = E = 0`,
    /// and the system factored for `(λ, r)`.
    pub fn new(
        m: &SparseMatrix,
        degrees: &[f64],
        init_y: &DenseMatrix,
        lambda: f64,
        r: f64,
    ) -> Result<Self> {
        let n = m.n_cols();
        let d = init_y.n_cols();
        if init_y.n_rows() != n || degrees.len() != n {
            return Err(PfeError::Shape(format!(
                "initialization is {}x{}, graph has {n} nodes and {} degrees",
                init_y.n_rows(),
                d,
                degrees.len()
            )));
        }
        if d > n {
            return Err(PfeError::Shape(format!("{d} channels for {n} pixels")));
        }
        let d_sqrt: Vec<f64> = degrees.iter().map(|v| v.sqrt()).collect();
        let mut scaled = init_y.clone();
        scaled.scale_rows(&d_sqrt);
        let polar = orthonormal_polar(&scaled);

        let key = SystemKey {
            lambda,
            r,
            weights: None,
        };
        let system = system_matrix(m, degrees, lambda, r)?;
        let factor = cholesky_factor(&system)?;
        let t = m.n_rows();
        Ok(EmbeddingState {
            y: init_y.clone(),
            p_mat: polar.p,
            b: DenseMatrix::zeros(n, d),
            c: DenseMatrix::zeros(t, d),
            e: DenseMatrix::zeros(t, d),
            factor,
            system,
            key,
            energy_trace: Vec::new(),
            channel_energy_trace: Vec::new(),
            orthogonality_trace: Vec::new(),
            rank_deficient_projections: usize::from(polar.completed_directions > 0),
            inner_tol: 1e-6,
            check_residuals: false,
        })
    }

    pub fn system_key(&self) -> SystemKey {
        self.key
    }

    /// Refactors `L` for a new `(λ, r)` or row-weighted difference matrix.
    /// No-op when the key already matches.
    pub fn refactor(
        &mut self,
        m_hat: &SparseMatrix,
        degrees: &[f64],
        key: SystemKey,
    ) -> Result<()> {
        if key == self.key {
            return Ok(());
        }
        let system = system_matrix(m_hat, degrees, key.lambda, key.r)?;
        self.factor = cholesky_factor(&system)?;
        self.system = system;
        self.key = key;
        Ok(())
    }
}

/// `L = λ·MᵀM + r·D`.
pub fn system_matrix(
    m: &SparseMatrix,
    degrees: &[f64],
    lambda: f64,
    r: f64,
) -> Result<SparseMatrix> {
    let diag: Vec<f64> = degrees.iter().map(|d| r * d).collect();
    m.gram().scaled_plus_diagonal(lambda, &diag)
}

/// Total and per-channel `Σ|(MY)_kv|`.
pub fn energy(m: &SparseMatrix, y: &DenseMatrix) -> Result<(f64, Vec<f64>)> {
    Ok(column_abs_sums(&m.multiply(y)?))
}

fn column_abs_sums(a: &DenseMatrix) -> (f64, Vec<f64>) {
    let per: Vec<f64> = a.columns().map(|c| c.iter().map(|v| v.abs()).sum()).collect();
    (per.iter().sum(), per)
}

/// `Σ_i ‖m_iᵀY‖₁^p` over the rows of `M`.
pub fn lp_energy(m: &SparseMatrix, y: &DenseMatrix, p: f64) -> Result<f64> {
    let my = m.multiply(y)?;
    let rows = row_l1_norms(&my);
    Ok(rows.iter().map(|v| v.powf(p)).sum())
}

fn row_l1_norms(a: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; a.n_rows()];
    for col in a.columns() {
        for (o, v) in out.iter_mut().zip(col) {
            *o += v.abs();
        }
    }
    out
}

/// Soft threshold of a scalar.
#[inline]
pub fn shrink_scalar(x: f64, gamma: f64) -> f64 {
    x.signum() * (x.abs() - gamma).max(0.0)
}

/// Elementwise `sign(X)·max(|X| − γ, 0)`.
pub fn shrink(x: &DenseMatrix, gamma: f64) -> DenseMatrix {
    x.map(|v| shrink_scalar(v, gamma))
}

/// Step (a.1): solves `L·Y = r·D^{1/2}F + λ·Mᵀ(C − E)` with the stored factor.
pub fn inner_step_a1(
    state: &EmbeddingState,
    m: &SparseMatrix,
    d_sqrt: &[f64],
    f_target: &DenseMatrix,
    lambda: f64,
    r: f64,
) -> Result<DenseMatrix> {
    if state.key.lambda != lambda || state.key.r != r {
        return Err(PfeError::ContractViolation(format!(
            "factor built for lambda={}, r={} but step requested lambda={lambda}, r={r}",
            state.key.lambda, state.key.r
        )));
    }
    if f_target.shape() != state.y.shape() {
        return Err(PfeError::Shape("target F must match Y".into()));
    }
    let mut rhs = f_target.clone();
    rhs.scale_rows(d_sqrt);
    let rhs_scale = r;
    rhs.as_mut_slice().iter_mut().for_each(|v| *v *= rhs_scale);
    let ce = state.c.sub(&state.e);
    let back = m.multiply_transpose(&ce)?;
    rhs.add_scaled(lambda, &back);

    let y = state.factor.solve(&rhs)?;
    if state.check_residuals {
        let ly = state.system.multiply(&y)?;
        let res = ly.max_abs_diff(&rhs);
        let scale = rhs.max_abs();
        if res > SOLVE_RESIDUAL_TOL * scale {
            return Err(PfeError::ContractViolation(format!(
                "linear solve residual {res:e} exceeds {SOLVE_RESIDUAL_TOL:e}·{scale:e}"
            )));
        }
    }
    Ok(y)
}

/// Split Bregman loop (a.1)–(a.3) for `min ‖MY‖₁,₁ + (r/2)‖D^{1/2}Y − F‖²`.
///
/// Stops after `iters` iterations or once `‖Y_new − Y_old‖_max ≤ inner_tol`.
pub fn split_bregman_inner(
    state: &mut EmbeddingState,
    m: &SparseMatrix,
    d_sqrt: &[f64],
    lambda: f64,
    r: f64,
    f_target: &DenseMatrix,
    iters: usize,
) -> Result<InnerReport> {
    inner_loop(state, m, m, d_sqrt, lambda, r, f_target, iters, "split Bregman")
}

/// Inner loop on `m_hat` with the energy trace measured on `m_trace`.
#[allow(clippy::too_many_arguments)]
fn inner_loop(
    state: &mut EmbeddingState,
    m_hat: &SparseMatrix,
    m_trace: &SparseMatrix,
    d_sqrt: &[f64],
    lambda: f64,
    r: f64,
    f_target: &DenseMatrix,
    iters: usize,
    stage: &'static str,
) -> Result<InnerReport> {
    let gamma = 1.0 / lambda;
    for it in 0..iters {
        let y_new = inner_step_a1(state, m_hat, d_sqrt, f_target, lambda, r)?;
        if !y_new.is_finite() {
            return Err(PfeError::Divergence {
                stage,
                iteration: it,
            });
        }
        let my = m_hat.multiply(&y_new)?;
        let mut c = my.clone();
        c.add_scaled(1.0, &state.e);
        let c = shrink(&c, gamma);
        state.e.add_scaled(1.0, &my);
        state.e.add_scaled(-1.0, &c);
        state.c = c;

        let delta = y_new.max_abs_diff(&state.y);
        state.y = y_new;
        let (total, per) = if std::ptr::eq(m_hat, m_trace) {
            column_abs_sums(&my)
        } else {
            energy(m_trace, &state.y)?
        };
        if !total.is_finite() {
            return Err(PfeError::Divergence {
                stage,
                iteration: it,
            });
        }
        state.energy_trace.push(total);
        state.channel_energy_trace.push(per);
        if delta <= state.inner_tol {
            return Ok(InnerReport {
                iterations: it + 1,
                converged: true,
            });
        }
    }
    Ok(InnerReport {
        iterations: iters,
        converged: false,
    })
}

/// One outer step: (a) inner solve with `F = P − B`, (b) `P ← polar(D^{1/2}Y + B)`,
/// (c) `B ← B + D^{1/2}Y − P`.
pub fn soc_outer_step(
    state: &mut EmbeddingState,
    m: &SparseMatrix,
    d_sqrt: &[f64],
    lambda: f64,
    r: f64,
    inner_iters: usize,
) -> Result<()> {
    let f = state.p_mat.sub(&state.b);
    split_bregman_inner(state, m, d_sqrt, lambda, r, &f, inner_iters)?;

    let mut z = state.y.clone();
    z.scale_rows(d_sqrt);
    z.add_scaled(1.0, &state.b);
    let polar = orthonormal_polar(&z);
    if polar.completed_directions > 0 {
        state.rank_deficient_projections += 1;
    }
    state.b = z.sub(&polar.p);
    state.p_mat = polar.p;

    let ptp = state.p_mat.transpose_matmul(&state.p_mat)?;
    let err = ptp.max_abs_diff(&DenseMatrix::identity(ptp.n_rows()));
    state.orthogonality_trace.push(err);
    Ok(())
}

/// Stage I: `cfg.outer_iters_s1` outer steps of `cfg.inner_iters_s1` inner
/// iterations with the large penalty `cfg.r_stage1`.
pub fn run_stage1(
    m: &SparseMatrix,
    degrees: &[f64],
    init_y: &DenseMatrix,
    cfg: &PfeConfig,
) -> Result<EmbeddingState> {
    let mut state = EmbeddingState::new(m, degrees, init_y, cfg.lambda, cfg.r_stage1)?;
    state.inner_tol = cfg.inner_tol;
    state.check_residuals = cfg.check_residuals;
    let d_sqrt: Vec<f64> = degrees.iter().map(|v| v.sqrt()).collect();
    for _ in 0..cfg.outer_iters_s1 {
        soc_outer_step(&mut state, m, &d_sqrt, cfg.lambda, cfg.r_stage1, cfg.inner_iters_s1)?;
    }
    Ok(state)
}

/// Stage II for p = 1: inner iterations only, `F = P − B` frozen from the
/// last outer step, penalty reduced to `r_stage2`.
pub fn run_stage2_l11(
    state: &mut EmbeddingState,
    m: &SparseMatrix,
    d_sqrt: &[f64],
    lambda: f64,
    r_stage2: f64,
    iters: usize,
) -> Result<InnerReport> {
    if iters == 0 {
        return Ok(InnerReport {
            iterations: 0,
            converged: false,
        });
    }
    let f = state.p_mat.sub(&state.b);
    let degrees: Vec<f64> = d_sqrt.iter().map(|s| s * s).collect();
    state.refactor(
        m,
        &degrees,
        SystemKey {
            lambda,
            r: r_stage2,
            weights: None,
        },
    )?;
    inner_loop(state, m, m, d_sqrt, lambda, r_stage2, &f, iters, "stage II")
}

/// Stage II for general p: majorization-minimization over reweighted L1,1
/// problems. Weights start at 1; each outer iteration solves the weighted
/// problem, then updates the weights by `cfg.reweight`.
pub fn run_stage2_l1p(
    state: &mut EmbeddingState,
    m: &SparseMatrix,
    degrees: &[f64],
    cfg: &PfeConfig,
) -> Result<()> {
    let d_sqrt: Vec<f64> = degrees.iter().map(|v| v.sqrt()).collect();
    let f = state.p_mat.sub(&state.b);
    let mut weights: Option<Vec<f64>> = None;

    for outer in 0..cfg.outer_iters_s2_l1p {
        let scaled;
        let (m_hat, tag) = match &weights {
            None => (m, None),
            Some(w) => {
                scaled = m.scale_rows(w);
                (&scaled, Some(fingerprint(w)))
            }
        };
        state.refactor(
            m_hat,
            degrees,
            SystemKey {
                lambda: cfg.lambda,
                r: cfg.r_stage2,
                weights: tag,
            },
        )?;
        let report = inner_loop(
            state,
            m_hat,
            m,
            &d_sqrt,
            cfg.lambda,
            cfg.r_stage2,
            &f,
            cfg.inner_iters_s2_l1p,
            "stage II (L1,p)",
        )?;

        // p = 1 keeps unit weights: x^0 = 1
        if cfg.p == 1.0 {
            if report.converged {
                break;
            }
            continue;
        }

        let next = match cfg.reweight {
            ReweightRule::ResidualScaled => {
                let rw = residual_weighting(&state.y, m, degrees)?;
                let norms = row_l1_norms(&m.multiply(&rw.y_weighted)?);
                norms
                    .iter()
                    .map(|&v| (cfg.alpha * v).max(cfg.epsilon_w).powf(cfg.p - 1.0))
                    .collect::<Vec<_>>()
            }
            ReweightRule::Majorizer => {
                let norms = row_l1_norms(&m.multiply(&state.y)?);
                norms
                    .iter()
                    .map(|&v| cfg.p * v.max(cfg.epsilon_w).powf(cfg.p - 1.0))
                    .collect()
            }
        };
        if next.iter().any(|w| !w.is_finite()) {
            return Err(PfeError::Divergence {
                stage: "stage II reweighting",
                iteration: outer,
            });
        }
        let unchanged = weights.as_deref() == Some(next.as_slice());
        weights = Some(next);
        if report.converged && unchanged {
            break;
        }
    }
    Ok(())
}

/// FNV-1a over the bit patterns of the weights.
fn fingerprint(w: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in w {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
