use crate::dense::{axpy, norm2};
use crate::error::{Result, SvtError};
use crate::lowrank::LowRankMatrix;
use crate::shrink::{shrink_operator, shrink_sparse, ShrinkageOutcome};
use crate::solver::config::{compute_k0, StopRule, SvtConfig};
use crate::solver::gap::noisy_bound_met;
use crate::solver::linear_map::{AdjointImage, LinearMap};
use crate::solver::report::{IterateView, SolveReport, SolveStatus};
use crate::solver::{numerical_message, record, relative, Clock, DivergenceGuard};

/// Minimizes `tau ||X||_* + ||X||_F^2 / 2` subject to `A(X) = b`.
pub fn svt_linear(a: &dyn LinearMap, b: &[f64], cfg: &SvtConfig) -> Result<SolveReport> {
    uzawa(a, b, cfg, false, &mut |_| {})
}

pub fn svt_linear_observed<F>(a: &dyn LinearMap, b: &[f64], cfg: &SvtConfig, mut observer: F) -> Result<SolveReport>
where
    F: FnMut(&IterateView<'_>),
{
    uzawa(a, b, cfg, false, &mut observer)
}

/// Minimizes `tau ||X||_* + ||X||_F^2 / 2` subject to `A(X) >= b`.
///
/// Stops once the largest violation `max(b - A(X), 0)` is at most
/// `eps ||b||` and the multiplier moved by at most `eps max(1, ||y||)`.
pub fn svt_inequality(a: &dyn LinearMap, b: &[f64], cfg: &SvtConfig) -> Result<SolveReport> {
    uzawa(a, b, cfg, true, &mut |_| {})
}

pub fn svt_inequality_observed<F>(a: &dyn LinearMap, b: &[f64], cfg: &SvtConfig, mut observer: F) -> Result<SolveReport>
where
    F: FnMut(&IterateView<'_>),
{
    uzawa(a, b, cfg, true, &mut observer)
}

fn shrink_image(img: &AdjointImage, s_k: usize, cfg: &SvtConfig) -> Result<ShrinkageOutcome> {
    match img {
        AdjointImage::Sampled(s) => shrink_sparse(s, cfg.tau, s_k, cfg.ell, &cfg.svd),
        AdjointImage::Dense(d) => shrink_operator(d, cfg.tau, s_k, cfg.ell, &cfg.svd),
    }
}

fn uzawa(
    a: &dyn LinearMap,
    b: &[f64],
    cfg: &SvtConfig,
    inequality: bool,
    observer: &mut dyn FnMut(&IterateView<'_>),
) -> Result<SolveReport> {
    let what = if inequality { "inequality" } else { "linear" };
    let norm_a = a.op_norm_bound();
    let bound = if norm_a > 0.0 { 2.0 / (norm_a * norm_a) } else { f64::INFINITY };
    cfg.validate(bound, what)?;
    if b.len() != a.len() {
        return Err(SvtError::dims(format!("b has length {} for a map with {} outputs", b.len(), a.len())));
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(SvtError::NonFinite(i));
    }
    if inequality && cfg.stop_rule != StopRule::RelativeResidual {
        return Err(SvtError::InvalidConfig("inequality constraints support only the residual rule".into()));
    }
    if matches!(cfg.stop_rule, StopRule::DualityGap { .. }) {
        return Err(SvtError::InvalidConfig(
            "the duality-gap rule is implemented for completion only".into(),
        ));
    }
    let clock = Clock::start();
    let (n1, n2) = a.shape();
    let norm_b = norm2(b);

    let mut y = vec![0.0; b.len()];
    let mut k0 = 0;
    if cfg.kick && !inequality && norm_b > 0.0 {
        let spectral = a.adjoint(b)?.spectral_norm_est()?;
        if spectral > 0.0 {
            k0 = compute_k0(cfg.tau, cfg.delta, spectral)?;
            let c = k0 as f64 * cfg.delta;
            for (yv, &bv) in y.iter_mut().zip(b) {
                *yv = c * bv;
            }
        }
    }

    let mut resid = vec![0.0; b.len()];
    let mut x = LowRankMatrix::zero(n1, n2);
    let mut r_prev = 0;
    let mut trajectory = Vec::new();
    let mut guard = DivergenceGuard::new(cfg);
    let mut status = SolveStatus::MaxIters;
    let mut message = None;
    let mut rel = f64::NAN;

    for k in 1..=cfg.k_max {
        let s_k = r_prev + 1;
        let out = match a.adjoint(&y).and_then(|img| shrink_image(&img, s_k, cfg)) {
            Ok(out) => out,
            Err(e) => {
                message = Some(format!("iteration {k}: {}", numerical_message(e)?));
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let ax = a.apply(&out.x)?;
        for ((r, &bv), &av) in resid.iter_mut().zip(b).zip(&ax) {
            *r = bv - av;
        }
        let rnorm = if inequality {
            resid.iter().map(|r| r.max(0.0).powi(2)).sum::<f64>().sqrt()
        } else {
            norm2(&resid)
        };
        rel = relative(rnorm, norm_b.max(if inequality { 1.0 } else { 0.0 }));
        trajectory.push(record(k, rel, s_k, &out, clock.ms()));
        r_prev = out.rank;
        x = out.x;
        if !rel.is_finite() {
            message = Some(format!("iteration {k}: non-finite residual"));
            status = SolveStatus::NumericalFailure;
            break;
        }

        if inequality {
            let mut moved = 0.0;
            for (yv, &r) in y.iter_mut().zip(&resid) {
                let next = (*yv + cfg.delta * r).max(0.0);
                moved += (next - *yv) * (next - *yv);
                *yv = next;
            }
            let stall = moved.sqrt() / norm2(&y).max(1.0);
            if rel <= cfg.eps && stall <= cfg.eps {
                status = SolveStatus::Converged;
                break;
            }
        } else {
            let done = match cfg.stop_rule {
                StopRule::NoisyDiscrepancy { sigma, noise_eps } => {
                    noisy_bound_met(rnorm * rnorm, b.len(), sigma, noise_eps)
                }
                _ => rel <= cfg.eps,
            };
            if done {
                status = SolveStatus::Converged;
                break;
            }
            axpy(cfg.delta, &resid, &mut y);
        }
        observer(&IterateView {
            k,
            x: &x,
            multiplier: &y,
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
        multiplier: y,
        trajectory,
        gaps: Vec::new(),
        relative_residual: rel,
        wall_seconds: clock.seconds(),
        message,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank::tests::random_lowrank;
    use crate::problem::{generate, relative_error, ProblemSpec};
    use crate::solver::complete::svt_complete_observed;
    use crate::solver::linear_map::{EntryFunctionals, Functional, SamplingOperator};

    #[test]
    fn sampling_map_reproduces_completion() {
        let spec = ProblemSpec::square(50, 2, 4.0, 3);
        let p = generate(&spec).unwrap();
        let cfg = SvtConfig::recommended(50, 50, spec.m);
        let mut a_sig = Vec::new();
        let ra = svt_complete_observed(&p.obs, &cfg, |v| a_sig.push(v.x.sigma().to_vec())).unwrap();
        let mut b_sig = Vec::new();
        let op = SamplingOperator::new(p.omega.clone());
        let rb = svt_linear_observed(&op, p.obs.values(), &cfg, |v| b_sig.push(v.x.sigma().to_vec())).unwrap();
        assert_eq!(ra.iterations, rb.iterations);
        assert_eq!(ra.k0, rb.k0);
        assert_eq!(a_sig.len(), b_sig.len());
        for (sa, sb) in a_sig.iter().zip(&b_sig) {
            assert_eq!(sa.len(), sb.len());
            for (x, y) in sa.iter().zip(sb) {
                assert!((x - y).abs() <= 1e-10 * x.max(1.0));
            }
        }
    }

    #[test]
    fn zero_rhs_converges_at_once() {
        let op = EntryFunctionals::full_vectorization(4, 5).unwrap();
        let rep = svt_linear(&op, &vec![0.0; 20], &SvtConfig::new(10.0, 1.0)).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.final_rank(), 0);
    }

    #[test]
    fn full_vectorization_recovers_matrix() {
        // with every entry observed the unique feasible point is M itself
        let m = random_lowrank(12, 10, 2, 5);
        let op = EntryFunctionals::full_vectorization(12, 10).unwrap();
        let b = op.apply(&m).unwrap();
        let mut cfg = SvtConfig::new(60.0, 1.9).with_eps(1e-6);
        cfg.k_max = 2000;
        let rep = svt_linear(&op, &b, &cfg).unwrap();
        assert!(rep.converged(), "{:?}", rep.status);
        assert!(relative_error(&rep.x, &m).unwrap() <= 1e-4);
    }

    #[test]
    fn satisfied_inequalities_leave_zero() {
        let op = EntryFunctionals::full_vectorization(3, 3).unwrap();
        let b = vec![-1.0, 0.0, -2.0, 0.0, -0.5, 0.0, 0.0, -3.0, 0.0];
        let rep = svt_inequality(&op, &b, &SvtConfig::new(1.0, 1.0)).unwrap();
        assert!(rep.converged());
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.final_rank(), 0);
        assert!(rep.multiplier.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn paired_inequalities_match_equality() {
        let spec = ProblemSpec::square(20, 2, 5.0, 8);
        let p = generate(&spec).unwrap();
        let fs = p
            .omega
            .iter()
            .map(|(i, j)| Functional { terms: vec![(i, j, 1.0)] })
            .collect();
        let op = EntryFunctionals::new(20, 20, fs).unwrap();
        let b = p.obs.values().to_vec();
        let eq = svt_linear(&op, &b, &SvtConfig::new(100.0, 1.8).with_eps(1e-7).with_k_max(20_000)).unwrap();
        assert!(eq.converged(), "{:?}", eq.status);

        let pair = op.paired().unwrap();
        let mut bb = b.clone();
        bb.extend(b.iter().map(|v| -v));
        let ineq = svt_inequality(&pair, &bb, &SvtConfig::new(100.0, 0.9).with_eps(1e-7).with_k_max(20_000)).unwrap();
        assert!(ineq.converged(), "{:?} after {}", ineq.status, ineq.iterations);
        assert!(ineq.multiplier.iter().all(|&v| v >= 0.0));
        let d = ineq.x.distance(&eq.x).unwrap() / eq.x.frobenius_norm();
        assert!(d <= 1e-3, "relative distance {d}");
    }

    #[test]
    fn single_constraint_matches_grid_search() {
        // minimize tau ||X||_* + ||X||_F^2 / 2 over 2x2 X with X00 + 2 X11 >= 3
        let tau = 0.5;
        let op = EntryFunctionals::new(
            2,
            2,
            vec![Functional {
                terms: vec![(0, 0, 1.0), (1, 1, 2.0)],
            }],
        )
        .unwrap();
        let cfg = SvtConfig::new(tau, 0.3).with_eps(1e-10).with_k_max(10_000);
        let rep = svt_inequality(&op, &[3.0], &cfg).unwrap();
        assert!(rep.converged());
        let x = rep.x.to_dense().unwrap();
        let value = rep.x.proximal_objective(tau);

        // the objective is unitarily invariant and the constraint only sees
        // the diagonal, so the minimizer is diagonal: grid over (d0, d1)
        let f = |d0: f64, d1: f64| tau * (d0.abs() + d1.abs()) + 0.5 * (d0 * d0 + d1 * d1);
        let mut best = f64::INFINITY;
        let steps = 3000;
        for a in 0..=steps {
            let d0 = 3.0 * a as f64 / steps as f64;
            let d1 = (3.0 - d0) / 2.0;
            best = best.min(f(d0, d1));
        }
        assert!((value - best).abs() <= 1e-3, "{value} vs {best}");
        assert!(x[(0, 0)] + 2.0 * x[(1, 1)] >= 3.0 - 1e-6);
    }
}
