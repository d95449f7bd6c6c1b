//! Invariant suite run on small random instances.
//!
//! Each check draws its own instances from a seeded stream and returns the
//! worst violation it saw. [`prox_suite`] and [`partial_svd_suite`] are
//! exposed separately so they can be run at larger sizes.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dense::{dot, norm2, svd_dense, DenseMatrix};
use crate::error::Result;
use crate::lanczos::{top_singular_triplets, PartialSvdParams};
use crate::lowrank::LowRankMatrix;
use crate::problem::{generate, relative_error, ProblemSpec};
use crate::sampled::{project_dense, SampledMatrix};
use crate::shrink::shrink_dense;
use crate::solver::{
    svt_complete, svt_complete_observed, svt_inequality_observed, svt_linear, EntryFunctionals, SamplingOperator,
    SvtConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn(&mut ChaCha8Rng) -> Result<std::result::Result<String, String>>;

const CHECKS: [(&str, CheckFn); 11] = [
    ("dense_svd", check_dense_svd),
    ("sampled_adjoint", check_sampled_adjoint),
    ("lowrank_projection", check_lowrank_projection),
    ("partial_svd", check_partial_svd),
    ("prox_optimality", check_prox),
    ("prox_nonexpansive", check_nonexpansive),
    ("completion_feasibility", check_completion),
    ("linear_equivalence", check_linear_equivalence),
    ("inequality_multipliers", check_inequality_multipliers),
    ("safe_step_monotone", check_safe_step),
    ("generator", check_generator),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check whose name contains `filter` (all when `None`).
pub fn run_checks(seed: u64, filter: Option<&str>) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .filter(|(_, (name, _))| filter.is_none_or(|f| name.contains(f)))
        .map(|(i, (name, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let start = Instant::now();
            let (passed, detail) = match f(&mut rng) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(d)) => (false, d),
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome {
                name: name.to_string(),
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n1, n2, |_, _| StandardNormal.sample(&mut *rng))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

/// Random sparse matrix with each entry present with probability `density`.
pub fn random_sparse(rng: &mut ChaCha8Rng, n1: usize, n2: usize, density: f64) -> Result<SampledMatrix> {
    let mut triplets = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if rng.random::<f64>() < density {
                triplets.push((i, j, StandardNormal.sample(&mut *rng)));
            }
        }
    }
    if triplets.is_empty() {
        triplets.push((0, 0, 1.0));
    }
    SampledMatrix::from_triplets(n1, n2, triplets)
}

fn random_lowrank(rng: &mut ChaCha8Rng, n1: usize, n2: usize, r: usize) -> Result<LowRankMatrix> {
    LowRankMatrix::from_product(&gaussian(rng, n1, r), &gaussian(rng, n2, r))
}

fn nuclear(a: &DenseMatrix) -> Result<f64> {
    Ok(svd_dense(a)?.sigma.iter().sum())
}

fn spectral(a: &DenseMatrix) -> Result<f64> {
    Ok(svd_dense(a)?.sigma.first().copied().unwrap_or(0.0))
}

fn verdict(ok: bool, detail: String) -> Result<std::result::Result<String, String>> {
    Ok(if ok { Ok(detail) } else { Err(detail) })
}

fn check_dense_svd(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let (mut recon, mut orth, mut order) = (0.0f64, 0.0f64, true);
    for _ in 0..40 {
        let (m, n) = (rng.random_range(1..=14), rng.random_range(1..=14));
        let a = gaussian(rng, m, n);
        let svd = svd_dense(&a)?;
        recon = recon.max(svd.reconstruct().sub(&a)?.frobenius_norm() / a.frobenius_norm());
        orth = orth.max(svd.u.orthonormality_error()).max(svd.v.orthonormality_error());
        order &= svd.sigma.windows(2).all(|w| w[0] >= w[1]) && svd.sigma.iter().all(|&s| s >= 0.0);
    }
    verdict(
        recon <= 1e-9 && orth <= 1e-10 && order,
        format!("reconstruction {recon:.2e}, orthonormality {orth:.2e}, ordered {order}"),
    )
}

fn check_sampled_adjoint(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let (mut adj, mut cs_ok, mut idem) = (0.0f64, true, true);
    for _ in 0..30 {
        let (m, n) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let density = rng.random_range(0.02..0.4);
        let s = random_sparse(rng, m, n, density)?;
        let x = gaussian_vec(rng, n);
        let y = gaussian_vec(rng, m);
        let sx = s.apply(&x)?;
        let sty = s.apply_adjoint(&y)?;
        let scale = s.frobenius_norm() * norm2(&x) * norm2(&y);
        adj = adj.max((dot(&sx, &y) - dot(&x, &sty)).abs() / scale.max(f64::MIN_POSITIVE));
        cs_ok &= norm2(&sx) <= s.frobenius_norm() * norm2(&x) * (1.0 + 1e-12);
        let again = project_dense(&s.to_dense(), s.pattern())?;
        idem &= again.values() == s.values();
    }
    verdict(
        adj <= 1e-12 && cs_ok && idem,
        format!("adjoint mismatch {adj:.2e}, Cauchy-Schwarz {cs_ok}, idempotent projection {idem}"),
    )
}

fn check_lowrank_projection(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (m, n) = (rng.random_range(2..=60), rng.random_range(2..=60));
        let r = rng.random_range(1..=m.min(n).min(4));
        let x = random_lowrank(rng, m, n, r)?;
        let s = random_sparse(rng, m, n, 0.3)?;
        let fast = x.add_project(&s, -1.0)?;
        let dense = x.to_dense()?;
        for (t, (i, j)) in s.pattern().iter().enumerate() {
            let want = s.values()[t] - dense[(i, j)];
            worst = worst.max((fast.values()[t] - want).abs() / (1.0 + dense[(i, j)].abs()));
        }
    }
    verdict(worst <= 1e-12, format!("max deviation from the dense path {worst:.2e}"))
}

/// Worst deviations seen by [`partial_svd_suite`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PartialSvdStats {
    pub matrices: usize,
    /// Largest `|sigma - sigma_dense| / sigma_dense` over all returned values.
    pub value_error: f64,
    /// Largest `max(||S v - sigma u||, ||S^T u - sigma v||) / sigma_1`.
    pub residual: f64,
}

/// Compares Lanczos triplets with a dense SVD on `count` random sparse
/// matrices up to `max_rows x max_cols` with densities in 1-20%.
pub fn partial_svd_suite(seed: u64, count: usize, max_rows: usize, max_cols: usize) -> Result<PartialSvdStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = PartialSvdStats::default();
    let params = PartialSvdParams::default();
    for _ in 0..count {
        let m = rng.random_range(max_rows.min(10)..=max_rows);
        let n = rng.random_range(max_cols.min(10)..=max_cols);
        let density = rng.random_range(0.01..=0.2);
        let s_mat = random_sparse(&mut rng, m, n, density)?;
        let dense = svd_dense(&s_mat.to_dense())?;
        let nonzero = dense.sigma.iter().filter(|&&v| v > 1e-10 * dense.sigma[0]).count();
        let k = rng.random_range(1..=10usize).min(nonzero.max(1));
        let out = top_singular_triplets(&s_mat, k, &params)?;
        let t = &out.triplets;
        let sigma1 = dense.sigma[0];
        for (i, &sv) in t.sigma().iter().enumerate() {
            stats.value_error = stats.value_error.max((sv - dense.sigma[i]).abs() / dense.sigma[i]);
            let u = t.u().column(i);
            let v = t.v().column(i);
            let su = s_mat.apply(&v)?;
            let stu = s_mat.apply_adjoint(&u)?;
            let r1: f64 = su.iter().zip(&u).map(|(a, b)| (a - sv * b).powi(2)).sum::<f64>().sqrt();
            let r2: f64 = stu.iter().zip(&v).map(|(a, b)| (a - sv * b).powi(2)).sum::<f64>().sqrt();
            stats.residual = stats.residual.max(r1.max(r2) / sigma1);
        }
        stats.matrices += 1;
    }
    Ok(stats)
}

fn check_partial_svd(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let st = partial_svd_suite(rng.random(), 10, 120, 90)?;
    verdict(
        st.value_error <= 1e-8 && st.residual <= 1e-8,
        format!(
            "{} matrices: value error {:.2e}, residual {:.2e}",
            st.matrices, st.value_error, st.residual
        ),
    )
}

/// Worst values seen by [`prox_suite`]; all should be non-positive or tiny.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProxStats {
    pub matrices: usize,
    pub perturbations: usize,
    /// Largest `h(X_hat) - h(X_hat + D)`, positive if a perturbation won.
    pub optimality_gap: f64,
    /// Largest `||W||_2 - 1`.
    pub spectral_excess: f64,
    /// Largest `max(||U^T W||_F, ||W V||_F)`.
    pub tangent_leak: f64,
}

/// Checks that `D_tau(Y)` minimizes `tau ||X||_* + ||X - Y||_F^2 / 2`
/// against random perturbations and that `(Y - X_hat) / tau - U V^T` is a
/// valid subgradient remainder, for `tau` in {0.1, 1, 5}.
pub fn prox_suite(seed: u64, matrices: usize, perturbations: usize) -> Result<ProxStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = ProxStats {
        optimality_gap: f64::NEG_INFINITY,
        spectral_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for idx in 0..matrices {
        let (m, n) = (rng.random_range(1..=10), rng.random_range(1..=8));
        let y = gaussian(&mut rng, m, n);
        let tau = [0.1, 1.0, 5.0][idx % 3];
        let out = shrink_dense(&y, tau)?;
        let xh = out.x.to_dense()?;
        let h = |x: &DenseMatrix| -> Result<f64> { Ok(tau * nuclear(x)? + 0.5 * x.sub(&y)?.frobenius_norm().powi(2)) };
        let h0 = h(&xh)?;
        for _ in 0..perturbations {
            let d = gaussian(&mut rng, m, n);
            let size = 10f64.powf(rng.random_range(-3.0..=0.0));
            let d = d.scale(size / d.frobenius_norm());
            st.optimality_gap = st.optimality_gap.max(h0 - h(&xh.add(&d)?)?);
            st.perturbations += 1;
        }
        let (u, v) = (out.x.u(), out.x.v());
        let uvt = u.matmul(&v.transpose())?;
        let w = y.sub(&xh)?.scale(1.0 / tau).sub(&uvt)?;
        st.spectral_excess = st.spectral_excess.max(spectral(&w)? - 1.0);
        if out.rank > 0 {
            let leak_u = u.t_matmul(&w)?.frobenius_norm();
            let leak_v = w.matmul(v)?.frobenius_norm();
            st.tangent_leak = st.tangent_leak.max(leak_u).max(leak_v);
        }
        st.matrices += 1;
    }
    Ok(st)
}

fn check_prox(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let st = prox_suite(rng.random(), 30, 100)?;
    verdict(
        st.optimality_gap <= 1e-9 && st.spectral_excess <= 1e-9 && st.tangent_leak <= 1e-9,
        format!(
            "{} matrices: optimality gap {:.2e}, ||W||_2 - 1 = {:.2e}, tangent leak {:.2e}",
            st.matrices, st.optimality_gap, st.spectral_excess, st.tangent_leak
        ),
    )
}

fn check_nonexpansive(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let (mut ratio, mut monotone) = (0.0f64, true);
    for _ in 0..40 {
        let (m, n) = (rng.random_range(1..=10), rng.random_range(1..=8));
        let tau = rng.random_range(0.05..3.0);
        let y1 = gaussian(rng, m, n);
        let y2 = y1.add(&gaussian(rng, m, n).scale(rng.random_range(0.01..1.0)))?;
        let d = shrink_dense(&y1, tau)?.x.distance(&shrink_dense(&y2, tau)?.x)?;
        ratio = ratio.max(d / y1.sub(&y2)?.frobenius_norm());
        let ranks: Vec<usize> = [0.1, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&t| shrink_dense(&y1, t).map(|o| o.rank))
            .collect::<Result<_>>()?;
        monotone &= ranks.windows(2).all(|w| w[0] >= w[1]);
    }
    verdict(
        ratio <= 1.0 + 1e-12 && monotone,
        format!("max ||D(Y1) - D(Y2)|| / ||Y1 - Y2|| = {ratio:.6}, rank nonincreasing in tau {monotone}"),
    )
}

fn small_instance(rng: &mut ChaCha8Rng, oversampling: f64) -> Result<crate::problem::GeneratedProblem> {
    generate(&ProblemSpec::square(40, 2, oversampling, rng.random()))
}

fn check_completion(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let p = small_instance(rng, 8.0)?;
    let cfg = SvtConfig::new(200.0, 1.9).with_k_max(3000);
    let mut on_omega = true;
    let rep = svt_complete_observed(&p.obs, &cfg, |v| on_omega &= v.multiplier.len() == p.omega.len())?;
    let err = relative_error(&rep.x, &p.m_true)?;
    verdict(
        rep.converged() && rep.relative_residual <= cfg.eps && on_omega,
        format!(
            "{:?} after {} iterations, residual {:.2e}, error {err:.2e}",
            rep.status, rep.iterations, rep.relative_residual
        ),
    )
}

fn check_linear_equivalence(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let p = small_instance(rng, 8.0)?;
    let cfg = SvtConfig::new(200.0, 1.9).with_k_max(3000);
    let a = svt_complete(&p.obs, &cfg)?;
    let op = SamplingOperator::new(Arc::clone(&p.omega));
    let b = svt_linear(&op, p.obs.values(), &cfg)?;
    let mut worst = 0.0f64;
    let same_len = a.trajectory.len() == b.trajectory.len();
    for (x, y) in a.x.sigma().iter().zip(b.x.sigma()) {
        worst = worst.max((x - y).abs() / x.abs().max(1.0));
    }
    let ranks_match = a.ranks() == b.ranks();
    verdict(
        same_len && ranks_match && a.x.rank() == b.x.rank() && worst <= 1e-10,
        format!(
            "{} vs {} iterations, final sigma deviation {worst:.2e}",
            a.iterations, b.iterations
        ),
    )
}

fn check_inequality_multipliers(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let p = small_instance(rng, 6.0)?;
    let op = EntryFunctionals::new(
        40,
        40,
        p.omega
            .iter()
            .map(|(i, j)| crate::solver::Functional { terms: vec![(i, j, 1.0)] })
            .collect(),
    )?
    .paired()?;
    let mut b: Vec<f64> = p.obs.values().iter().map(|v| v - 0.1).collect();
    b.extend(p.obs.values().iter().map(|v| -v - 0.1));
    let mut min_y = f64::INFINITY;
    let rep = svt_inequality_observed(&op, &b, &SvtConfig::new(200.0, 0.9).with_k_max(300), |v| {
        min_y = min_y.min(v.multiplier.iter().copied().fold(f64::INFINITY, f64::min));
    })?;
    verdict(
        min_y >= 0.0,
        format!("smallest multiplier entry {min_y:.2e} over {} iterations", rep.iterations),
    )
}

fn check_safe_step(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let p = small_instance(rng, 8.0)?;
    let reference = svt_complete(&p.obs, &SvtConfig::new(200.0, 1.5).with_eps(1e-12).with_k_max(5000))?;
    let y_star = reference.multiplier;
    let mut dist = Vec::new();
    svt_complete_observed(&p.obs, &SvtConfig::new(200.0, 1.5).with_k_max(200), |v| {
        dist.push(v.multiplier.iter().zip(&y_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
    })?;
    let worst = dist
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        worst <= 1e-12,
        format!("{} logged iterates, largest relative increase {worst:.2e}", dist.len()),
    )
}

fn check_generator(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let spec = ProblemSpec::square(30, 3, 4.0, rng.random()).with_noise(0.1);
    let a = generate(&spec)?;
    let b = generate(&spec)?;
    let same = a.obs.values() == b.obs.values() && a.omega == b.omega && a.m_true.sigma() == b.m_true.sigma();
    let x = random_lowrank(rng, 30, 30, 2)?;
    let fast = relative_error(&x, &a.m_true)?;
    let dm = a.m_true.to_dense()?;
    let slow = x.to_dense()?.sub(&dm)?.frobenius_norm() / dm.frobenius_norm();
    let dev = (fast - slow).abs();
    verdict(
        same && dev <= 1e-10,
        format!("bitwise repeatable {same}, factored error deviation {dev:.2e}"),
    )
}
