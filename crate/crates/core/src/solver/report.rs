use serde::{Deserialize, Serialize};

use crate::lowrank::LowRankMatrix;
use crate::solver::config::SvtConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    NumericalFailure,
    Diverged,
}

/// One row of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Relative residual on the observed set (or of the constraints).
    pub residual: f64,
    pub rank: usize,
    /// Number of triplets requested first: `r_{k-1} + 1`.
    pub s_k: usize,
    /// Smallest singular value the partial SVD computed.
    pub sigma_min: Option<f64>,
    pub wall_ms: f64,
    pub growth_rounds: usize,
    pub lanczos_steps: usize,
    /// Singular values within tolerance of `tau`.
    pub ambiguous: usize,
}

/// Bounds `a_k <= p* <= b_k` on the optimal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBounds {
    pub lower: f64,
    pub upper: f64,
}

impl GapBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn relative_gap(&self) -> f64 {
        self.gap() / self.upper.abs().max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Iterations skipped by the initial fast-forward.
    pub k0: usize,
    pub x: LowRankMatrix,
    /// Final multiplier on the constraint space (for the Dantzig solver,
    /// `Y+ - Y-` on the sampled set).
    pub multiplier: Vec<f64>,
    pub trajectory: Vec<IterationRecord>,
    pub gaps: Vec<GapBounds>,
    pub relative_residual: f64,
    pub wall_seconds: f64,
    pub message: Option<String>,
    pub config: SvtConfig,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn final_rank(&self) -> usize {
        self.x.rank()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.trajectory.iter().map(|r| r.rank).collect()
    }

    pub fn rank_nondecreasing(&self) -> bool {
        self.trajectory.windows(2).all(|w| w[0].rank <= w[1].rank)
    }

    /// Iterations whose partial SVD had to grow `s` more than once.
    pub fn multi_growth_iterations(&self) -> usize {
        self.trajectory.iter().filter(|r| r.growth_rounds > 1).count()
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            status: self.status,
            iterations: self.iterations,
            k0: self.k0,
            relative_residual: self.relative_residual,
            final_rank: self.final_rank(),
            wall_seconds: self.wall_seconds,
            message: self.message.clone(),
            config: self.config.clone(),
        }
    }
}

/// JSON form of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub k0: usize,
    pub relative_residual: f64,
    pub final_rank: usize,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub config: SvtConfig,
}

/// Read-only view handed to observers after each multiplier update.
pub struct IterateView<'a> {
    pub k: usize,
    pub x: &'a LowRankMatrix,
    pub multiplier: &'a [f64],
    pub record: &'a IterationRecord,
}
