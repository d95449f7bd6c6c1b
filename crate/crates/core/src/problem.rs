//! Random low-rank completion instances and recovery metrics.
//!
//! `M = M_L M_R^T` with i.i.d. standard normal factors (ChaCha8 stream,
//! normals by the ziggurat method of `rand_distr`), `Omega` drawn uniformly
//! without replacement, and optional additive Gaussian noise on `Omega`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dense::{dot, norm2, DenseMatrix};
use crate::error::{Result, SvtError};
use crate::lowrank::LowRankMatrix;
use crate::sampled::{IndexSet, SampledMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    /// Number of observed entries.
    pub m: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ProblemSpec {
    /// Square `n x n` instance with `m = ratio * d_r` samples.
    pub fn square(n: usize, rank: usize, oversampling: f64, seed: u64) -> Self {
        let m = (oversampling * degrees_of_freedom(n, n, rank) as f64).round() as usize;
        Self {
            n1: n,
            n2: n,
            rank,
            m: m.min(n * n),
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank > self.n1.min(self.n2) {
            return Err(SvtError::InvalidInput(format!(
                "rank {} exceeds min({}, {})",
                self.rank, self.n1, self.n2
            )));
        }
        if self.m > self.n1 * self.n2 {
            return Err(SvtError::InvalidInput(format!(
                "{} samples requested from {} entries",
                self.m,
                self.n1 * self.n2
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(SvtError::InvalidInput("noise_sigma must be finite and >= 0".into()));
        }
        let dof = degrees_of_freedom(self.n1, self.n2, self.rank);
        if self.m < dof {
            log::warn!(
                "m = {} is below the {dof} degrees of freedom of a rank-{} matrix; recovery is not expected",
                self.m,
                self.rank
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemMetrics {
    pub dof: usize,
    /// `m / d_r`
    pub oversampling: f64,
    /// `m / (n1 n2)`
    pub sampling_ratio: f64,
    pub noise_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub spec: ProblemSpec,
    pub m_true: LowRankMatrix,
    pub omega: Arc<IndexSet>,
    /// Observations on `omega`, noisy when `noise_sigma > 0`.
    pub obs: SampledMatrix,
    /// Noise realisation on `omega`.
    pub noise: Vec<f64>,
    /// `P_Omega(M)` without noise.
    pub clean: SampledMatrix,
    pub metrics: ProblemMetrics,
}

pub fn degrees_of_freedom(n1: usize, n2: usize, r: usize) -> usize {
    r * (n1 + n2 - r)
}

pub fn generate(spec: &ProblemSpec) -> Result<GeneratedProblem> {
    spec.validate()?;
    let (n1, n2, r) = (spec.n1, spec.n2, spec.rank);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let left = DenseMatrix::from_fn(n1, r, |_, _| StandardNormal.sample(&mut rng));
    let right = DenseMatrix::from_fn(n2, r, |_, _| StandardNormal.sample(&mut rng));

    let mut flat: Vec<usize> = rand::seq::index::sample(&mut rng, n1 * n2, spec.m).into_vec();
    flat.sort_unstable();
    let pairs = flat.into_iter().map(|k| (k / n2, k % n2)).collect();
    let omega = Arc::new(IndexSet::from_sorted_unique(n1, n2, pairs));

    let clean_vals: Vec<f64> = omega
        .iter()
        .map(|(i, j)| if r == 0 { 0.0 } else { dot(left.row(i), right.row(j)) })
        .collect();
    let noise: Vec<f64> = if spec.noise_sigma > 0.0 {
        (0..omega.len())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.noise_sigma * z
            })
            .collect()
    } else {
        vec![0.0; omega.len()]
    };
    let obs_vals: Vec<f64> = clean_vals.iter().zip(&noise).map(|(a, z)| a + z).collect();
    let m_true = LowRankMatrix::from_product(&left, &right)?;
    let clean = SampledMatrix::new(omega.clone(), clean_vals)?;
    let obs = SampledMatrix::new(omega.clone(), obs_vals)?;

    let dof = degrees_of_freedom(n1, n2, r);
    let metrics = ProblemMetrics {
        dof,
        oversampling: if dof == 0 { f64::INFINITY } else { spec.m as f64 / dof as f64 },
        sampling_ratio: spec.m as f64 / (n1 * n2) as f64,
        noise_ratio: if clean.frobenius_norm() > 0.0 {
            norm2(&noise) / clean.frobenius_norm()
        } else {
            f64::NAN
        },
    };
    Ok(GeneratedProblem {
        spec: spec.clone(),
        m_true,
        omega,
        obs,
        noise,
        clean,
        metrics,
    })
}

/// Noise level giving `||P_Omega(Z)|| / ||P_Omega(M)|| = ratio` in
/// expectation. The noise is drawn after `M` and `Omega`, so the returned
/// `sigma` does not change the instance it was calibrated on.
pub fn sigma_for_noise_ratio(spec: &ProblemSpec, ratio: f64) -> Result<f64> {
    if !(ratio >= 0.0) || !ratio.is_finite() {
        return Err(SvtError::InvalidInput(format!("noise ratio {ratio} must be finite and >= 0")));
    }
    let clean = generate(&ProblemSpec {
        noise_sigma: 0.0,
        ..spec.clone()
    })?;
    Ok(ratio * clean.clean.frobenius_norm() / (spec.m.max(1) as f64).sqrt())
}

/// Mean absolute observed entry, `mean |M_ij|` over `Omega`.
pub fn mean_abs_observed(clean: &SampledMatrix) -> f64 {
    let v = clean.values();
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

/// `||X - M||_F / ||M||_F`, computed from the factors.
pub fn relative_error(x: &LowRankMatrix, m: &LowRankMatrix) -> Result<f64> {
    let denom = m.frobenius_norm();
    if denom == 0.0 {
        return Err(SvtError::ZeroNorm("reference matrix"));
    }
    Ok(x.distance(m)? / denom)
}

/// `||P_Omega(Z)||_F / ||P_Omega(M)||_F`.
pub fn noise_ratio(noise_on_omega: &[f64], m_on_omega: &[f64]) -> Result<f64> {
    if noise_on_omega.len() != m_on_omega.len() {
        return Err(SvtError::dims("noise and signal lengths differ"));
    }
    let denom = norm2(m_on_omega);
    if denom == 0.0 {
        return Err(SvtError::ZeroNorm("signal on omega"));
    }
    Ok(norm2(noise_on_omega) / denom)
}
