use crate::dense::{axpy, norm2};
use crate::error::{Result, SvtError};
use crate::lowrank::LowRankMatrix;
use crate::sampled::SampledMatrix;
use crate::shrink::shrink_sparse;
use crate::solver::config::{compute_k0, StopRule, SvtConfig};
use crate::solver::gap::{duality_gap, noisy_bound_met};
use crate::solver::report::{IterateView, SolveReport, SolveStatus};
use crate::solver::{numerical_message, record, relative, Clock, DivergenceGuard, COMPLETION_STEP_BOUND};

/// Matrix completion from the entries in `obs`.
pub fn svt_complete(obs: &SampledMatrix, cfg: &SvtConfig) -> Result<SolveReport> {
    svt_complete_observed(obs, cfg, |_| {})
}

/// [`svt_complete`], calling `observer` after every multiplier update with
/// `X^k` and `Y^k` (values on the sampling set).
pub fn svt_complete_observed<F>(obs: &SampledMatrix, cfg: &SvtConfig, mut observer: F) -> Result<SolveReport>
where
    F: FnMut(&IterateView<'_>),
{
    cfg.validate(COMPLETION_STEP_BOUND, "completion")?;
    if obs.nnz() == 0 {
        return Err(SvtError::InvalidInput("no observed entries".into()));
    }
    let clock = Clock::start();
    let (n1, n2) = obs.shape();
    let exec = cfg.svd.exec;
    let norm_b = obs.frobenius_norm();

    let mut y = SampledMatrix::zeros(obs.pattern().clone());
    let mut k0 = 0;
    if cfg.kick && norm_b > 0.0 {
        k0 = compute_k0(cfg.tau, cfg.delta, obs.spectral_norm_est(1e-10))?;
        let c = k0 as f64 * cfg.delta;
        for (yv, &b) in y.values_mut().iter_mut().zip(obs.values()) {
            *yv = c * b;
        }
        log::debug!("skipping {k0} iterations with X = 0");
    }

    let mut resid = vec![0.0; obs.nnz()];
    let mut x = LowRankMatrix::zero(n1, n2);
    let mut r_prev = 0;
    let mut trajectory = Vec::new();
    let mut gaps = Vec::new();
    let mut guard = DivergenceGuard::new(cfg);
    let mut status = SolveStatus::MaxIters;
    let mut message = None;
    let mut rel = f64::NAN;

    for k in 1..=cfg.k_max {
        let s_k = r_prev + 1;
        let out = match shrink_sparse(&y, cfg.tau, s_k, cfg.ell, &cfg.svd) {
            Ok(out) => out,
            Err(e) => {
                message = Some(format!("iteration {k}: {}", numerical_message(e)?));
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        out.x.add_project_into(obs, -1.0, &mut resid, exec)?;
        let rnorm = norm2(&resid);
        rel = relative(rnorm, norm_b);
        let row = record(k, rel, s_k, &out, clock.ms());
        r_prev = out.rank;
        x = out.x;
        trajectory.push(row);
        if !rel.is_finite() {
            message = Some(format!("iteration {k}: non-finite residual"));
            status = SolveStatus::NumericalFailure;
            break;
        }

        let gap = match cfg.stop_rule {
            StopRule::DualityGap { .. } => Some(duality_gap(&x, &y, obs, cfg.tau, cfg.densify_cap)?),
            _ if cfg.record_gap => Some(duality_gap(&x, &y, obs, cfg.tau, cfg.densify_cap)?),
            _ => None,
        };
        if let Some(g) = gap {
            gaps.push(g);
        }
        let done = match cfg.stop_rule {
            StopRule::RelativeResidual => rel <= cfg.eps,
            StopRule::DualityGap { gap_tol } => gap.is_some_and(|g| g.relative_gap() <= gap_tol),
            StopRule::NoisyDiscrepancy { sigma, noise_eps } => {
                noisy_bound_met(rnorm * rnorm, obs.nnz(), sigma, noise_eps)
            }
        };
        if done {
            status = SolveStatus::Converged;
            break;
        }

        axpy(cfg.delta, &resid, y.values_mut());
        observer(&IterateView {
            k,
            x: &x,
            multiplier: y.values(),
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
        k0,
        x,
        multiplier: y.into_values(),
        trajectory,
        gaps,
        relative_residual: rel,
        wall_seconds: clock.seconds(),
        message,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate, relative_error, ProblemSpec};
    use crate::sampled::IndexSet;
    use crate::shrink::shrink_dense;
    use std::sync::Arc;

    #[test]
    fn zero_observations_converge_immediately() {
        let omega = Arc::new(IndexSet::new(5, 4, vec![(0, 0), (1, 2), (4, 3)]).unwrap());
        let obs = SampledMatrix::zeros(omega);
        let rep = svt_complete(&obs, &SvtConfig::recommended(5, 4, 3)).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.final_rank(), 0);
        assert_eq!(rep.relative_residual, 0.0);
    }

    #[test]
    fn rejects_unsafe_step_without_flag() {
        let p = generate(&ProblemSpec::square(20, 1, 4.0, 0)).unwrap();
        let cfg = SvtConfig::new(100.0, 2.5);
        assert!(matches!(svt_complete(&p.obs, &cfg), Err(SvtError::InvalidConfig(_))));
    }

    /// The same loop with a full dense SVD at every step.
    fn dense_reference(obs: &SampledMatrix, cfg: &SvtConfig, k0: usize, iters: usize) -> Vec<Vec<f64>> {
        let mut y: Vec<f64> = obs.values().iter().map(|b| k0 as f64 * cfg.delta * b).collect();
        let mut out = Vec::new();
        for _ in 0..iters {
            let ys = SampledMatrix::new(obs.pattern().clone(), y.clone()).unwrap();
            let x = shrink_dense(&ys.to_dense(), cfg.tau).unwrap().x;
            out.push(x.sigma().to_vec());
            let r = x.add_project(obs, -1.0).unwrap();
            axpy(cfg.delta, r.values(), &mut y);
        }
        out
    }

    #[test]
    fn matches_dense_reference_loop() {
        let spec = ProblemSpec::square(40, 2, 5.0, 17);
        let p = generate(&spec).unwrap();
        let cfg = SvtConfig::recommended(40, 40, spec.m);
        let mut sigmas = Vec::new();
        let rep = svt_complete_observed(&p.obs, &cfg, |v| sigmas.push(v.x.sigma().to_vec())).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.final_rank(), 2);
        assert!(relative_error(&rep.x, &p.m_true).unwrap() <= 1e-3);
        assert!(rep.relative_residual <= cfg.eps);

        let reference = dense_reference(&p.obs, &cfg, rep.k0, sigmas.len());
        for (k, (a, b)) in sigmas.iter().zip(&reference).enumerate() {
            assert_eq!(a.len(), b.len(), "rank differs at iteration {}", k + 1);
            for (sa, sb) in a.iter().zip(b) {
                assert!((sa - sb).abs() <= 1e-6 * sb.max(1.0), "iteration {}: {sa} vs {sb}", k + 1);
            }
        }
    }

    #[test]
    fn multiplier_stays_on_omega_and_ranks_grow() {
        let spec = ProblemSpec::square(60, 3, 4.0, 2);
        let p = generate(&spec).unwrap();
        let rep = svt_complete(&p.obs, &SvtConfig::new(300.0, 1.9).with_k_max(3000)).unwrap();
        assert!(rep.converged(), "{:?} after {}", rep.status, rep.iterations);
        assert_eq!(rep.multiplier.len(), p.omega.len());
        assert!(rep.rank_nondecreasing());
        assert_eq!(rep.trajectory.len(), rep.iterations);
    }

    #[test]
    fn gap_rule_and_weak_duality() {
        let spec = ProblemSpec::square(30, 2, 4.0, 4);
        let p = generate(&spec).unwrap();
        let mut cfg = SvtConfig::new(150.0, 1.9).with_k_max(3000);
        cfg.record_gap = true;
        let rep = svt_complete(&p.obs, &cfg).unwrap();
        assert!(rep.converged(), "{:?} after {}", rep.status, rep.iterations);
        assert_eq!(rep.gaps.len(), rep.iterations);
        for g in &rep.gaps {
            assert!(g.lower <= g.upper + 1e-9 * g.upper.abs().max(1.0));
        }
    }

    #[test]
    fn noisy_rule_stops_early() {
        let spec = ProblemSpec::square(60, 2, 5.0, 9).with_noise(0.3);
        let p = generate(&spec).unwrap();
        let cfg = SvtConfig::recommended(60, 60, spec.m).with_stop_rule(StopRule::NoisyDiscrepancy {
            sigma: 0.3,
            noise_eps: 0.05,
        });
        let rep = svt_complete(&p.obs, &cfg).unwrap();
        assert!(rep.converged());
        let resid = rep.x.add_project(&p.obs, -1.0).unwrap();
        let bound = 1.05 * spec.m as f64 * 0.09;
        assert!(crate::dense::sq_norm(resid.values()) <= bound);
        assert!(rep.relative_residual > 1e-4);
    }

    #[test]
    fn diverges_under_huge_step() {
        let spec = ProblemSpec::square(30, 2, 3.0, 1);
        let p = generate(&spec).unwrap();
        let mut cfg = SvtConfig::new(150.0, 200.0);
        cfg.unsafe_step = true;
        cfg.k_max = 200;
        let rep = svt_complete(&p.obs, &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Diverged);
    }
}
