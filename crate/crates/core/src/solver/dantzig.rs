use crate::dense::norm2;
use crate::error::{Result, SvtError};
use crate::lowrank::LowRankMatrix;
use crate::sampled::SampledMatrix;
use crate::shrink::shrink_sparse;
use crate::solver::config::{StopRule, SvtConfig};
use crate::solver::gap::noisy_bound_met;
use crate::solver::report::{IterateView, SolveReport, SolveStatus};
use crate::solver::{numerical_message, record, relative, Clock, DivergenceGuard};

/// Step bound for the two stacked sampling operators.
pub const DANTZIG_STEP_BOUND: f64 = 1.0;

/// Minimizes `tau ||X||_* + ||X||_F^2 / 2` subject to
/// `|X_ij - B_ij| <= E_ij` on the sampling set.
///
/// With the residual rule, stops once every violation is at most
/// `eps * rms(B)` and the stacked multipliers moved by at most
/// `eps max(1, ||(Y+, Y-)||)`. The discrepancy rule stops at the first
/// iterate consistent with the noise level instead.
pub fn svt_dantzig(obs: &SampledMatrix, tolerance: &SampledMatrix, cfg: &SvtConfig) -> Result<SolveReport> {
    svt_dantzig_observed(obs, tolerance, cfg, |_| {})
}

/// [`svt_dantzig`] with an observer; the multiplier it sees is `Y+ - Y-`.
pub fn svt_dantzig_observed<F>(
    obs: &SampledMatrix,
    tolerance: &SampledMatrix,
    cfg: &SvtConfig,
    mut observer: F,
) -> Result<SolveReport>
where
    F: FnMut(&IterateView<'_>),
{
    cfg.validate(DANTZIG_STEP_BOUND, "dantzig")?;
    if matches!(cfg.stop_rule, StopRule::DualityGap { .. }) {
        return Err(SvtError::InvalidConfig(
            "the duality-gap rule is implemented for completion only".into(),
        ));
    }
    if !tolerance.same_pattern(obs) {
        return Err(SvtError::dims("tolerances must share the observation pattern"));
    }
    if let Some(i) = tolerance.values().iter().position(|&e| e < 0.0) {
        return Err(SvtError::InvalidInput(format!("negative tolerance at position {i}")));
    }
    if obs.nnz() == 0 {
        return Err(SvtError::InvalidInput("no observed entries".into()));
    }
    let clock = Clock::start();
    let (n1, n2) = obs.shape();
    let exec = cfg.svd.exec;
    let m = obs.nnz();
    let norm_b = obs.frobenius_norm();
    let scale = norm_b / (m as f64).sqrt();
    let e = tolerance.values();

    let mut y_plus = vec![0.0; m];
    let mut y_minus = vec![0.0; m];
    let mut diff = SampledMatrix::zeros(obs.pattern().clone());
    let mut resid = vec![0.0; m];
    let mut x = LowRankMatrix::zero(n1, n2);
    let mut r_prev = 0;
    let mut trajectory = Vec::new();
    let mut guard = DivergenceGuard::new(cfg);
    let mut status = SolveStatus::MaxIters;
    let mut message = None;
    let mut rel = f64::NAN;

    for k in 1..=cfg.k_max {
        let s_k = r_prev + 1;
        let out = match shrink_sparse(&diff, cfg.tau, s_k, cfg.ell, &cfg.svd) {
            Ok(out) => out,
            Err(err) => {
                message = Some(format!("iteration {k}: {}", numerical_message(err)?));
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        out.x.add_project_into(obs, -1.0, &mut resid, exec)?;
        let rnorm = norm2(&resid);
        rel = relative(rnorm, norm_b);
        trajectory.push(record(k, rel, s_k, &out, clock.ms()));
        r_prev = out.rank;
        x = out.x;
        if !rel.is_finite() {
            message = Some(format!("iteration {k}: non-finite residual"));
            status = SolveStatus::NumericalFailure;
            break;
        }

        let mut violation = f64::NEG_INFINITY;
        let mut moved = 0.0;
        let mut size = 0.0;
        for t in 0..m {
            let r = resid[t];
            violation = violation.max(r.abs() - e[t]);
            let p = (y_plus[t] + cfg.delta * (r - e[t])).max(0.0);
            let q = (y_minus[t] + cfg.delta * (-r - e[t])).max(0.0);
            moved += (p - y_plus[t]).powi(2) + (q - y_minus[t]).powi(2);
            size += p * p + q * q;
            y_plus[t] = p;
            y_minus[t] = q;
        }
        for ((d, p), q) in diff.values_mut().iter_mut().zip(&y_plus).zip(&y_minus) {
            *d = p - q;
        }
        let stall = moved.sqrt() / size.sqrt().max(1.0);
        let done = match cfg.stop_rule {
            StopRule::NoisyDiscrepancy { sigma, noise_eps } => noisy_bound_met(rnorm * rnorm, m, sigma, noise_eps),
            _ => violation <= cfg.eps * scale && stall <= cfg.eps,
        };
        if done {
            status = SolveStatus::Converged;
            break;
        }
        observer(&IterateView {
            k,
            x: &x,
            multiplier: diff.values(),
            record: trajectory.last().expect("pushed above"),
        });
        if guard.observe(rel) {
            status = SolveStatus::Diverged;
            message = Some(format!(
                "residual above {}x its first value for {} iterations",
                cfg.divergence_factor, cfg.divergence_window
            ));
            break;
        }
    }

    Ok(SolveReport {
        status,
        iterations: trajectory.len(),
        k0: 0,
        x,
        multiplier: diff.into_values(),
        trajectory,
        gaps: Vec::new(),
        relative_residual: rel,
        wall_seconds: clock.seconds(),
        message,
        config: cfg.clone(),
    })
}
