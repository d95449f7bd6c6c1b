use serde::{Deserialize, Serialize};

use crate::error::{Result, SvtError};
use crate::lanczos::PartialSvdParams;
use crate::lowrank::DEFAULT_DENSIFY_CAP;

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    /// `||P_Omega(X - M)||_F / ||P_Omega(M)||_F <= eps`.
    RelativeResidual,
    /// Relative duality gap `(b_k - a_k) / max(1, |b_k|) <= gap_tol`.
    DualityGap { gap_tol: f64 },
    /// `||P_Omega(X - B)||_F^2 <= (1 + noise_eps) m sigma^2`.
    NoisyDiscrepancy { sigma: f64, noise_eps: f64 },
}

/// Default slack for the noisy discrepancy rule.
pub const DEFAULT_NOISE_EPS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvtConfig {
    pub tau: f64,
    /// Constant step size.
    pub delta: f64,
    pub eps: f64,
    pub ell: usize,
    pub k_max: usize,
    pub stop_rule: StopRule,
    /// Accept step sizes above the proven convergence bound.
    pub unsafe_step: bool,
    /// Fast-forward through the leading iterations where `X^k = 0`.
    pub kick: bool,
    /// Compute the duality-gap pair every iteration (completion only).
    pub record_gap: bool,
    /// Cap on `n1 * n2` for anything that must be densified.
    pub densify_cap: usize,
    /// Declare divergence once the residual has stayed at least
    /// `divergence_factor` times its first value for `divergence_window`
    /// consecutive iterations.
    pub divergence_factor: f64,
    pub divergence_window: usize,
    #[serde(skip)]
    pub svd: PartialSvdParams,
}

impl SvtConfig {
    pub fn new(tau: f64, delta: f64) -> Self {
        Self {
            tau,
            delta,
            eps: 1e-4,
            ell: 5,
            k_max: 500,
            stop_rule: StopRule::RelativeResidual,
            unsafe_step: false,
            kick: true,
            record_gap: false,
            densify_cap: DEFAULT_DENSIFY_CAP,
            divergence_factor: 10.0,
            divergence_window: 20,
            svd: PartialSvdParams::default(),
        }
    }

    /// `tau = 5 max(n1, n2)` and `delta = 1.2 n1 n2 / m`. The step exceeds
    /// the proven bound, so `unsafe_step` is switched on.
    pub fn recommended(n1: usize, n2: usize, m: usize) -> Self {
        let mut cfg = Self::new(default_tau(n1, n2), default_delta(n1, n2, m));
        cfg.unsafe_step = true;
        cfg
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = rule;
        self
    }

    pub fn validate(&self, step_bound: f64, what: &str) -> Result<()> {
        let bad = |msg: String| Err(SvtError::InvalidConfig(msg));
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.k_max == 0 {
            return bad("k_max must be at least 1".into());
        }
        if self.ell == 0 {
            return bad("ell must be at least 1".into());
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        match self.stop_rule {
            StopRule::DualityGap { gap_tol } if !(gap_tol > 0.0) => {
                return bad("gap_tol must be positive".into());
            }
            StopRule::NoisyDiscrepancy { sigma, noise_eps } if !(sigma >= 0.0) || !(noise_eps >= 0.0) => {
                return bad("noise sigma and eps must be nonnegative".into());
            }
            _ => {}
        }
        if self.delta >= step_bound {
            if !self.unsafe_step {
                return bad(format!(
                    "{what}: step size {} is not below the convergence bound {step_bound:.6}; set unsafe_step to run anyway",
                    self.delta
                ));
            }
            log::info!(
                "{what}: step size {} exceeds the convergence bound {step_bound:.6}; relying on the divergence detector",
                self.delta
            );
        }
        Ok(())
    }
}

pub fn default_tau(n1: usize, n2: usize) -> f64 {
    5.0 * n1.max(n2) as f64
}

pub fn default_delta(n1: usize, n2: usize, m: usize) -> f64 {
    1.2 * (n1 as f64) * (n2 as f64) / (m.max(1) as f64)
}

/// The integer `k0` with `tau / (delta ||P_Omega(M)||_2)` in `(k0 - 1, k0]`.
pub fn compute_k0(tau: f64, delta: f64, pom_spectral: f64) -> Result<usize> {
    if !(tau > 0.0 && delta > 0.0 && pom_spectral > 0.0) {
        return Err(SvtError::InvalidInput("k0 needs positive tau, delta and norm".into()));
    }
    let ratio = tau / (delta * pom_spectral);
    Ok((ratio.ceil() as usize).max(1))
}
