//! Singular value shrinkage `D_tau(Y) = sum_{sigma_i > tau} (sigma_i - tau) u_i v_i^T`.

use crate::dense::{svd_dense, DenseMatrix};
use crate::error::{Result, SvtError};
use crate::lanczos::{svd_above_threshold, LinearOperator, PartialSvdParams};
use crate::lowrank::LowRankMatrix;
use crate::sampled::SampledMatrix;

#[derive(Debug, Clone)]
pub struct ShrinkageOutcome {
    pub x: LowRankMatrix,
    /// Number of input singular values strictly above `tau`.
    pub rank: usize,
    /// Whether the computed spectrum reached down to `tau`.
    pub crossed_threshold: bool,
    /// Singular values within `triplet_tol * sigma_1` of `tau`; they follow
    /// the strict rule but are flagged for diagnostics.
    pub ambiguous: usize,
    /// Values of `s` tried by the partial SVD (empty on the dense path).
    pub s_history: Vec<usize>,
    /// Smallest singular value that was computed, if any.
    pub sigma_min: Option<f64>,
    pub lanczos_steps: usize,
}

impl ShrinkageOutcome {
    pub fn growth_rounds(&self) -> usize {
        self.s_history.len().saturating_sub(1)
    }
}

/// Shrinkage through a full dense SVD.
pub fn shrink_dense(y: &DenseMatrix, tau: f64) -> Result<ShrinkageOutcome> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(SvtError::InvalidInput(format!("tau must be finite and >= 0, got {tau}")));
    }
    let (m, n) = y.shape();
    let svd = svd_dense(y)?;
    let sigma1 = svd.sigma.first().copied().unwrap_or(0.0);
    // singular values at rounding level count as zero
    let floor = tau.max(sigma1 * (m.max(n) as f64) * f64::EPSILON);
    let rank = svd.sigma.iter().take_while(|&&s| s > floor).count();
    let ambiguous = svd
        .sigma
        .iter()
        .filter(|&&s| (s - tau).abs() <= 1e-8 * sigma1 && s > 0.0)
        .count();
    let u = DenseMatrix::from_fn(m, rank, |i, t| svd.u[(i, t)]);
    let v = DenseMatrix::from_fn(n, rank, |j, t| svd.v[(j, t)]);
    let shrunk: Vec<f64> = svd.sigma[..rank].iter().map(|s| s - tau).collect();
    Ok(ShrinkageOutcome {
        x: LowRankMatrix::from_parts(u, shrunk, v)?,
        rank,
        crossed_threshold: rank < svd.sigma.len(),
        ambiguous,
        s_history: Vec::new(),
        sigma_min: svd.sigma.last().copied(),
        lanczos_steps: 0,
    })
}

/// Shrinkage of a sampled matrix through the incremental partial SVD.
pub fn shrink_sparse(
    y: &SampledMatrix,
    tau: f64,
    s_start: usize,
    ell: usize,
    params: &PartialSvdParams,
) -> Result<ShrinkageOutcome> {
    shrink_operator(y, tau, s_start, ell, params)
}

/// [`shrink_sparse`] for any matrix-free operator.
pub fn shrink_operator<A: LinearOperator + ?Sized>(
    y: &A,
    tau: f64,
    s_start: usize,
    ell: usize,
    params: &PartialSvdParams,
) -> Result<ShrinkageOutcome> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SvtError::InvalidInput(format!(
            "the partial-SVD path needs tau > 0, got {tau}"
        )));
    }
    let (m, n) = y.shape();
    let res = svd_above_threshold(y, tau, s_start.clamp(1, m.min(n).max(1)), ell, params)?;
    let t = &res.triplets;
    let sigma = t.sigma();
    let sigma1 = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().take_while(|&&s| s > tau).count();
    let ambiguous = sigma
        .iter()
        .filter(|&&s| (s - tau).abs() <= params.triplet_tol * sigma1)
        .count();
    let u = DenseMatrix::from_fn(m, rank, |i, k| t.u()[(i, k)]);
    let v = DenseMatrix::from_fn(n, rank, |j, k| t.v()[(j, k)]);
    let shrunk: Vec<f64> = sigma[..rank].iter().map(|s| s - tau).collect();
    Ok(ShrinkageOutcome {
        x: LowRankMatrix::from_parts(u, shrunk, v)?,
        rank,
        crossed_threshold: res.crossed_threshold,
        ambiguous,
        sigma_min: sigma.last().copied(),
        lanczos_steps: res.lanczos_steps,
        s_history: res.s_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_example() {
        let out = shrink_dense(&DenseMatrix::from_diag(&[3.0, 1.0]), 2.0).unwrap();
        assert_eq!(out.rank, 1);
        let x = out.x.to_dense().unwrap();
        assert_eq!(x, DenseMatrix::from_diag(&[1.0, 0.0]));
    }

    #[test]
    fn zero_threshold_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = DenseMatrix::from_fn(7, 2, |_, _| rng.random_range(-1.0..1.0));
        let r = DenseMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let y = l.matmul(&r.transpose()).unwrap();
        let out = shrink_dense(&y, 0.0).unwrap();
        assert_eq!(out.rank, 2);
        let err = out.x.to_dense().unwrap().sub(&y).unwrap().frobenius_norm();
        assert!(err <= 1e-9 * y.frobenius_norm());
    }

    #[test]
    fn large_threshold_gives_zero() {
        let y = DenseMatrix::from_diag(&[3.0, 1.0]);
        let out = shrink_dense(&y, 3.0).unwrap();
        assert_eq!(out.rank, 0);
        assert_eq!(out.x.to_dense().unwrap(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn sparse_single_entry() {
        let y = SampledMatrix::from_triplets(4, 3, vec![(0, 0, 5.0)]).unwrap();
        let out = shrink_sparse(&y, 2.0, 1, 5, &PartialSvdParams::default()).unwrap();
        assert_eq!(out.rank, 1);
        assert!((out.x.sigma()[0] - 3.0).abs() < 1e-12);
        assert!((out.x.u()[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((out.x.v()[(0, 0)].abs() - 1.0).abs() < 1e-12);

        let out = shrink_sparse(&y, 6.0, 1, 5, &PartialSvdParams::default()).unwrap();
        assert_eq!(out.rank, 0);
    }

    #[test]
    fn sparse_rejects_zero_tau() {
        let y = SampledMatrix::from_triplets(2, 2, vec![(0, 0, 1.0)]).unwrap();
        assert!(shrink_sparse(&y, 0.0, 1, 5, &PartialSvdParams::default()).is_err());
    }

    #[test]
    fn sparse_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut trip = Vec::new();
        for i in 0..200 {
            for j in 0..150 {
                if rng.random::<f64>() < 0.05 {
                    trip.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let y = SampledMatrix::from_triplets(200, 150, trip).unwrap();
        let dense = svd_dense(&y.to_dense()).unwrap();
        let tau = 0.5 * (dense.sigma[2] + dense.sigma[3]);
        let reference = shrink_dense(&y.to_dense(), tau).unwrap();
        let out = shrink_sparse(&y, tau, 1, 5, &PartialSvdParams::default()).unwrap();
        assert_eq!(out.rank, 3);
        assert!(out.crossed_threshold);
        for (a, b) in out.x.sigma().iter().zip(reference.x.sigma()) {
            assert!((a - b).abs() <= 1e-8 * dense.sigma[0]);
        }
    }
}
