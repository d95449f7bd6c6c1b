use crate::dense::{dot, sq_norm, svd_dense_capped, DEFAULT_DENSE_SVD_CAP};
use crate::error::{Result, SvtError};
use crate::lowrank::LowRankMatrix;
use crate::sampled::SampledMatrix;
use crate::solver::report::GapBounds;

/// Lower and upper bounds on the optimal value at iteration `k`.
///
/// `lower = f_tau(X) + <Y, P_Omega(M - X)>` is the dual function at `Y`
/// (`X` minimizes the Lagrangian there). `upper = f_tau(X~)` for the feasible
/// point `X~ = X + P_Omega(M - X)`, which is not low rank, so it is
/// densified and `densify_cap` bounds `n1 * n2`.
pub fn duality_gap(
    x: &LowRankMatrix,
    y_prev: &SampledMatrix,
    obs: &SampledMatrix,
    tau: f64,
    densify_cap: usize,
) -> Result<GapBounds> {
    if !y_prev.same_pattern(obs) {
        return Err(SvtError::dims("multiplier and observations live on different patterns"));
    }
    let resid = x.add_project(obs, -1.0)?;
    let lower = x.proximal_objective(tau) + dot(y_prev.values(), resid.values());

    let (n1, n2) = x.shape();
    if n1.max(n2) > DEFAULT_DENSE_SVD_CAP {
        return Err(SvtError::SizeCap {
            what: "duality gap (dense SVD dimension)",
            requested: n1.max(n2),
            cap: DEFAULT_DENSE_SVD_CAP,
        });
    }
    let mut feasible = x.to_dense_capped(densify_cap)?;
    for ((i, j), &v) in obs.pattern().iter().zip(obs.values()) {
        feasible.as_mut_slice()[i * n2 + j] = v;
    }
    let sigma = svd_dense_capped(&feasible, DEFAULT_DENSE_SVD_CAP)?.sigma;
    let nuclear: f64 = sigma.iter().sum();
    let upper = tau * nuclear + 0.5 * sq_norm(feasible.as_slice());
    Ok(GapBounds { lower, upper })
}

/// `||P_Omega(X - B)||_F^2 <= (1 + eps) m sigma^2` with `m = |Omega|`.
pub fn noisy_stop_check(x: &LowRankMatrix, obs: &SampledMatrix, sigma: f64, eps: f64) -> Result<bool> {
    if !(sigma >= 0.0) || !(eps >= 0.0) {
        return Err(SvtError::InvalidInput("sigma and eps must be nonnegative".into()));
    }
    let resid = x.add_project(obs, -1.0)?;
    Ok(noisy_bound_met(sq_norm(resid.values()), obs.nnz(), sigma, eps))
}

pub(crate) fn noisy_bound_met(resid_sq: f64, m: usize, sigma: f64, eps: f64) -> bool {
    resid_sq <= (1.0 + eps) * m as f64 * sigma * sigma
}
