use crate::error::{PfeError, Result};

/// How the L1,p stage recomputes edge weights between majorization steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReweightRule {
    /// `w_i = max(α‖m_iᵀŶ‖₁, ε)^{p−1}` on residual-weighted channels.
    ResidualScaled,
    /// `w_i = p · max(‖m_iᵀY‖₁, ε)^{p−1}` on raw channels.
    Majorizer,
}

/// Solver parameters. [`Default`] is the clustering profile;
/// [`PfeConfig::boundary_profile`] is the setting used with boundary-map
/// affinities.
#[derive(Clone, Debug, PartialEq)]
pub struct PfeConfig {
    /// Number of embedding channels.
    pub d: usize,
    /// Exponent of the L1,p objective, `0 < p ≤ 1`.
    pub p: f64,
    pub lambda: f64,
    /// Orthogonality penalty during stage I.
    pub r_stage1: f64,
    /// Relaxed penalty during stage II.
    pub r_stage2: f64,
    pub alpha: f64,
    /// Floor inside the reweighting power.
    pub epsilon_w: f64,
    pub outer_iters_s1: usize,
    pub inner_iters_s1: usize,
    pub stage2_iters: usize,
    pub outer_iters_s2_l1p: usize,
    pub inner_iters_s2_l1p: usize,
    pub seed: u64,
    pub reweight: ReweightRule,
    /// Inner loop stops early once `‖Y_new − Y_old‖_max` drops to this.
    pub inner_tol: f64,
    /// Verify `‖L·Y − rhs‖_∞ < 1e-8·‖rhs‖_∞` after every linear solve.
    pub check_residuals: bool,
}

impl Default for PfeConfig {
    fn default() -> Self {
        PfeConfig {
            d: 4,
            p: 0.8,
            lambda: 40000.0,
            r_stage1: 600.0,
            r_stage2: 10.0,
            alpha: 0.1,
            epsilon_w: 1e-5,
            outer_iters_s1: 5,
            inner_iters_s1: 8,
            stage2_iters: 40,
            outer_iters_s2_l1p: 5,
            inner_iters_s2_l1p: 20,
            seed: 0,
            reweight: ReweightRule::ResidualScaled,
            inner_tol: 1e-6,
            check_residuals: false,
        }
    }
}

/// Neighborhood radius paired with the clustering profile.
pub const CLUSTERING_RADIUS: usize = 3;
/// Neighborhood radius paired with the boundary-affinity profile.
pub const BOUNDARY_RADIUS: usize = 5;

impl PfeConfig {
    pub fn clustering_profile() -> Self {
        Self::default()
    }

    pub fn boundary_profile() -> Self {
        PfeConfig {
            lambda: 4000.0,
            alpha: 50.0,
            epsilon_w: 1e-2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(PfeError::Config(msg));
        if self.d == 0 || self.d > 32 {
            return fail(format!("d = {} must be in 1..=32", self.d));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return fail(format!("p = {} must be in (0, 1]", self.p));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("r1", self.r_stage1),
            ("r2", self.r_stage2),
            ("eps", self.epsilon_w),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 50.0) {
            return fail(format!("alpha = {} must be in (0, 50]", self.alpha));
        }
        if !(self.inner_tol >= 0.0) {
            return fail(format!("inner tolerance {} must be non-negative", self.inner_tol));
        }
        Ok(())
    }
}
