//! The thresholding iterations: matrix completion, general linear equality
//! and inequality constraints, and the matrix Dantzig selector.
//!
//! Every solver alternates `X^k = D_tau(A*(y^{k-1}))` with a multiplier step
//! of size `delta` and returns a [`SolveReport`]. Failures of the partial SVD
//! and divergence under an oversized step come back as a report status, so
//! the trajectory up to that point is kept.

mod complete;
mod config;
mod dantzig;
mod gap;
mod linear;
mod linear_map;
mod report;

use std::time::Instant;

pub use complete::{svt_complete, svt_complete_observed};
pub use config::{compute_k0, default_delta, default_tau, StopRule, SvtConfig, DEFAULT_NOISE_EPS};
pub use dantzig::{svt_dantzig, svt_dantzig_observed, DANTZIG_STEP_BOUND};
pub use gap::{duality_gap, noisy_stop_check};
pub use linear::{svt_inequality, svt_inequality_observed, svt_linear, svt_linear_observed};
pub use linear_map::{AdjointImage, DenseMeasurements, EntryFunctionals, Functional, LinearMap, SamplingOperator};
pub use report::{GapBounds, IterateView, IterationRecord, ReportSummary, SolveReport, SolveStatus};

use crate::error::{Result, SvtError};
use crate::shrink::ShrinkageOutcome;

/// Proven step bound for the completion iteration.
pub const COMPLETION_STEP_BOUND: f64 = 2.0;

/// `num / den`, with `0 / 0 = 0`.
pub(crate) fn relative(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Turns a numerical failure into a message for the report; anything else
/// is passed on.
pub(crate) fn numerical_message(e: SvtError) -> Result<String> {
    match e {
        SvtError::NumericalFailure(msg) => Ok(msg),
        other => Err(other),
    }
}

pub(crate) struct DivergenceGuard {
    factor: f64,
    window: usize,
    first: Option<f64>,
    streak: usize,
}

impl DivergenceGuard {
    pub(crate) fn new(cfg: &SvtConfig) -> Self {
        Self {
            factor: cfg.divergence_factor,
            window: cfg.divergence_window,
            first: None,
            streak: 0,
        }
    }

    /// Feeds one residual; true once the run counts as diverged.
    pub(crate) fn observe(&mut self, residual: f64) -> bool {
        let first = *self.first.get_or_insert(residual);
        if self.window == 0 {
            return false;
        }
        if first > 0.0 && residual >= self.factor * first {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.streak >= self.window
    }
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Self(Instant::now())
    }

    pub(crate) fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }

    pub(crate) fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub(crate) fn record(k: usize, residual: f64, s_k: usize, out: &ShrinkageOutcome, wall_ms: f64) -> IterationRecord {
    IterationRecord {
        k,
        residual,
        rank: out.rank,
        s_k,
        sigma_min: out.sigma_min,
        wall_ms,
        growth_rounds: out.growth_rounds(),
        lanczos_steps: out.lanczos_steps,
        ambiguous: out.ambiguous,
    }
}
