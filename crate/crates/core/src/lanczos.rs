//! Top singular triplets of a sparse operator by Golub-Kahan-Lanczos
//! bidiagonalization with partial reorthogonalization.
//!
//! The recurrence builds `A V_k = U_k B_k` and
//! `A^T U_k = V_k B_k^T + beta_k v_k e_k^T` with `B_k` upper bidiagonal.
//! Orthogonality of the Lanczos bases is tracked with the usual
//! omega-recurrences; a vector is reorthogonalized against the stored basis
//! (and so is the next one) only when the estimated loss crosses
//! `reorth_threshold`. Breakdowns (`alpha` or `beta` numerically zero) are
//! continued with a fresh random direction orthogonal to the basis, which
//! is what lets repeated singular values and rank-deficient operators come
//! out right.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{axpy, dot, norm2, svd_dense, DenseMatrix};
use crate::error::{Result, SvtError};
use crate::lowrank::{LowRankMatrix, ORTHONORMAL_TOL};
use crate::par::{map_collect, Execution};
use crate::sampled::SampledMatrix;

/// Matrix-free operator: the only access the Lanczos engine needs.
pub trait LinearOperator: Sync {
    fn shape(&self) -> (usize, usize);
    fn apply_into(&self, exec: Execution, x: &[f64], y: &mut [f64]);
    fn apply_adjoint_into(&self, exec: Execution, y: &[f64], x: &mut [f64]);
}

impl LinearOperator for SampledMatrix {
    fn shape(&self) -> (usize, usize) {
        SampledMatrix::shape(self)
    }

    fn apply_into(&self, exec: Execution, x: &[f64], y: &mut [f64]) {
        SampledMatrix::apply_into(self, exec, x, y).expect("lanczos passes conforming vectors")
    }

    fn apply_adjoint_into(&self, exec: Execution, y: &[f64], x: &mut [f64]) {
        SampledMatrix::apply_adjoint_into(self, exec, y, x).expect("lanczos passes conforming vectors")
    }
}

impl LinearOperator for DenseMatrix {
    fn shape(&self) -> (usize, usize) {
        DenseMatrix::shape(self)
    }

    fn apply_into(&self, _exec: Execution, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    fn apply_adjoint_into(&self, _exec: Execution, y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, self.row(i), x);
        }
    }
}

struct Transposed<'a, A: ?Sized>(&'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for Transposed<'_, A> {
    fn shape(&self) -> (usize, usize) {
        let (m, n) = self.0.shape();
        (n, m)
    }

    fn apply_into(&self, exec: Execution, x: &[f64], y: &mut [f64]) {
        self.0.apply_adjoint_into(exec, x, y)
    }

    fn apply_adjoint_into(&self, exec: Execution, y: &[f64], x: &mut [f64]) {
        self.0.apply_into(exec, y, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialSvdParams {
    /// Lanczos step budget; `None` means `10 s + 30`.
    pub max_lanczos_steps: Option<usize>,
    pub reorth_threshold: f64,
    /// Relative residual `||A v - sigma u|| / sigma_1` accepted per triplet.
    pub triplet_tol: f64,
    pub seed: u64,
    /// Reorthogonalize every vector, for debugging the partial scheme.
    pub full_reorth: bool,
    pub exec: Execution,
}

impl Default for PartialSvdParams {
    fn default() -> Self {
        Self {
            max_lanczos_steps: None,
            reorth_threshold: f64::EPSILON.sqrt(),
            triplet_tol: 1e-8,
            seed: 0x5174_1a2c,
            full_reorth: false,
            exec: Execution::default(),
        }
    }
}

impl PartialSvdParams {
    pub fn steps_for(&self, s: usize) -> usize {
        self.max_lanczos_steps.unwrap_or(10 * s + 30)
    }

    pub fn validate(&self, s: usize) -> Result<()> {
        if !(self.triplet_tol > 0.0) {
            return Err(SvtError::InvalidConfig("triplet_tol must be positive".into()));
        }
        if !(self.reorth_threshold > 0.0) {
            return Err(SvtError::InvalidConfig("reorth_threshold must be positive".into()));
        }
        if self.steps_for(s) < s {
            return Err(SvtError::InvalidConfig(format!(
                "max_lanczos_steps {} is below the {s} requested triplets",
                self.steps_for(s)
            )));
        }
        Ok(())
    }
}

/// Output of [`top_singular_triplets`].
#[derive(Debug, Clone)]
pub struct PartialSvd {
    pub triplets: LowRankMatrix,
    pub requested: usize,
    /// Fewer than `requested` nonzero singular values exist.
    pub short: bool,
    pub lanczos_steps: usize,
    pub reorthogonalizations: usize,
}

/// Output of [`svd_above_threshold`].
#[derive(Debug, Clone)]
pub struct ThresholdedSvdResult {
    pub triplets: LowRankMatrix,
    /// Number of triplets requested in the last round.
    pub computed_count: usize,
    pub crossed_threshold: bool,
    /// Successive values of `s`: `s_start, s_start + ell, ...`.
    pub s_history: Vec<usize>,
    pub lanczos_steps: usize,
}

impl ThresholdedSvdResult {
    /// Number of times `s` had to grow past its starting value.
    pub fn growth_rounds(&self) -> usize {
        self.s_history.len().saturating_sub(1)
    }
}

/// The `s` largest singular triplets of `op`.
pub fn top_singular_triplets<A: LinearOperator + ?Sized>(
    op: &A,
    s: usize,
    params: &PartialSvdParams,
) -> Result<PartialSvd> {
    let (m, n) = op.shape();
    let dim = m.min(n);
    if s == 0 || s > dim {
        return Err(SvtError::InvalidInput(format!(
            "requested {s} triplets from a {m}x{n} operator"
        )));
    }
    params.validate(s)?;
    if m < n {
        // Run on the transpose so the right-hand space is the smaller one.
        let mut out = run_tall(&Transposed(op), s, params)?;
        out.triplets = out.triplets.transpose();
        Ok(out)
    } else {
        run_tall(op, s, params)
    }
}

fn run_tall<A: LinearOperator + ?Sized>(op: &A, s: usize, params: &PartialSvdParams) -> Result<PartialSvd> {
    let dim = op.shape().1;
    let mut lz = Bidiagonalization::new(op, params);
    let max_steps = params.steps_for(s).min(dim);
    let mut next_check = s;
    loop {
        let exhausted = lz.step()?;
        let k = lz.steps();
        if exhausted || k >= next_check || k >= max_steps {
            let ritz = lz.ritz()?;
            if exhausted || ritz.converged(s, params.triplet_tol) {
                let out = lz.finish(ritz, s)?;
                return Ok(out);
            }
            if k >= max_steps {
                return Err(SvtError::NumericalFailure(format!(
                    "Lanczos did not converge to {s} triplets in {k} steps"
                )));
            }
            next_check = k + (k / 8).max(2);
        }
    }
}

/// Computes triplets in rounds of `s_start, s_start + ell, ...` until the
/// smallest computed singular value is at or below `tau`, or the rank of
/// `op` is exhausted.
pub fn svd_above_threshold<A: LinearOperator + ?Sized>(
    op: &A,
    tau: f64,
    s_start: usize,
    ell: usize,
    params: &PartialSvdParams,
) -> Result<ThresholdedSvdResult> {
    if !(tau >= 0.0) {
        return Err(SvtError::InvalidInput("threshold must be nonnegative".into()));
    }
    if s_start == 0 || ell == 0 {
        return Err(SvtError::InvalidInput("s_start and ell must be at least 1".into()));
    }
    let (m, n) = op.shape();
    let dim = m.min(n);
    let mut s = s_start.min(dim);
    let mut s_history = Vec::new();
    let mut lanczos_steps = 0;
    loop {
        s_history.push(s);
        let part = top_singular_triplets(op, s, params)?;
        lanczos_steps += part.lanczos_steps;
        let smallest = part.triplets.sigma().last().copied();
        let crossed = smallest.is_some_and(|v| v <= tau);
        if crossed || part.short || s == dim {
            if part.short && !crossed {
                log::debug!(
                    "rank exhausted at {} triplets before crossing tau = {tau}",
                    part.triplets.rank()
                );
            }
            return Ok(ThresholdedSvdResult {
                triplets: part.triplets,
                computed_count: s,
                crossed_threshold: crossed,
                s_history,
                lanczos_steps,
            });
        }
        s = (s + ell).min(dim);
    }
}

struct Ritz {
    svd: crate::dense::DenseSvd,
    residuals: Vec<f64>,
}

impl Ritz {
    fn converged(&self, s: usize, tol: f64) -> bool {
        let sigma1 = self.svd.sigma.first().copied().unwrap_or(0.0);
        self.residuals.len() >= s && self.residuals[..s].iter().all(|&r| r <= tol * sigma1)
    }
}

struct Bidiagonalization<'a, A: ?Sized> {
    op: &'a A,
    params: &'a PartialSvdParams,
    m: usize,
    n: usize,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    /// `beta[j]` couples `u_{j-1}` and `v_j`; `beta[0] = 0`.
    beta: Vec<f64>,
    /// Orthogonality estimates of the newest `u` and `v` against the
    /// stored ones.
    mu: Vec<f64>,
    nu: Vec<f64>,
    force_u: bool,
    force_v: bool,
    anorm: f64,
    eps1: f64,
    rng: ChaCha8Rng,
    reorths: usize,
    scratch_m: Vec<f64>,
    scratch_n: Vec<f64>,
}

impl<'a, A: LinearOperator + ?Sized> Bidiagonalization<'a, A> {
    fn new(op: &'a A, params: &'a PartialSvdParams) -> Self {
        let (m, n) = op.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut v0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv = norm2(&v0);
        v0.iter_mut().for_each(|x| *x /= nv);
        Self {
            op,
            params,
            m,
            n,
            u: Vec::new(),
            v: vec![v0],
            alpha: Vec::new(),
            beta: vec![0.0],
            mu: Vec::new(),
            nu: vec![1.0],
            force_u: params.full_reorth,
            force_v: params.full_reorth,
            anorm: 0.0,
            eps1: (m.max(n) as f64).sqrt() * f64::EPSILON / 2.0,
            rng,
            reorths: 0,
            scratch_m: vec![0.0; m],
            scratch_n: vec![0.0; n],
        }
    }

    fn steps(&self) -> usize {
        self.alpha.len()
    }

    /// One Lanczos step. Returns `true` once the space is exhausted, in
    /// which case `B_k` carries every singular value of the operator.
    fn step(&mut self) -> Result<bool> {
        let j = self.alpha.len();
        let exec = self.params.exec;

        // p = A v_j - beta_j u_{j-1}
        let mut p = std::mem::take(&mut self.scratch_m);
        self.op.apply_into(exec, &self.v[j], &mut p);
        if j > 0 {
            axpy(-self.beta[j], &self.u[j - 1], &mut p);
        }
        let mut alpha = norm2(&p);
        self.anorm = self.anorm.max((alpha * alpha + self.beta[j] * self.beta[j]).sqrt());
        self.update_mu(j, alpha);
        let needs = self.force_u || max_abs(&self.mu[..j]) > self.params.reorth_threshold;
        if needs || alpha < f64::EPSILON.sqrt() * self.anorm {
            alpha = reorthogonalize(&mut p, &self.u);
            self.reorths += 1;
            self.reset_estimates_u(j);
            self.force_u = if self.params.full_reorth { true } else { !self.force_u && needs };
        }
        let u_j = if alpha <= self.breakdown_tol() {
            alpha = 0.0;
            match self.random_orthogonal(self.m, true) {
                Some(u) => u,
                None => {
                    self.scratch_m = p;
                    return Ok(true);
                }
            }
        } else {
            p.iter().map(|x| x / alpha).collect()
        };
        self.scratch_m = p;
        self.alpha.push(alpha);
        self.u.push(u_j);

        if self.v.len() == self.n {
            // V already spans the whole space, so A^T u_j - alpha_j v_j = 0.
            self.beta.push(0.0);
            self.v.push(vec![0.0; self.n]);
            return Ok(true);
        }

        // q = A^T u_j - alpha_j v_j
        let mut q = std::mem::take(&mut self.scratch_n);
        self.op.apply_adjoint_into(exec, &self.u[j], &mut q);
        axpy(-alpha, &self.v[j], &mut q);
        let mut beta = norm2(&q);
        self.anorm = self.anorm.max((alpha * alpha + beta * beta).sqrt());
        self.update_nu(j, beta);
        let needs = self.force_v || max_abs(&self.nu[..=j]) > self.params.reorth_threshold;
        if needs || beta < f64::EPSILON.sqrt() * self.anorm {
            beta = reorthogonalize(&mut q, &self.v);
            self.reorths += 1;
            self.reset_estimates_v(j);
            self.force_v = if self.params.full_reorth { true } else { !self.force_v && needs };
        }
        let exhausted;
        let v_next = if beta <= self.breakdown_tol() {
            beta = 0.0;
            match self.random_orthogonal(self.n, false) {
                Some(v) => {
                    exhausted = false;
                    v
                }
                None => {
                    exhausted = true;
                    vec![0.0; self.n]
                }
            }
        } else {
            exhausted = false;
            q.iter().map(|x| x / beta).collect()
        };
        self.scratch_n = q;
        self.beta.push(beta);
        self.v.push(v_next);
        Ok(exhausted)
    }

    fn breakdown_tol(&self) -> f64 {
        100.0 * self.eps1 * self.anorm
    }

    /// mu_{j,i} for i < j, from
    /// alpha_j mu_{j,i} = beta_{i+1} nu_{j,i+1} + alpha_i nu_{j,i} - beta_j mu_{j-1,i}.
    fn update_mu(&mut self, j: usize, alpha_j: f64) {
        // self.mu holds mu_{j-1, 0..j-1}, self.nu holds nu_{j, 0..=j}
        let mut next = vec![0.0; j];
        if alpha_j > 0.0 {
            let hj = (alpha_j * alpha_j + self.beta[j] * self.beta[j]).sqrt();
            for (i, slot) in next.iter_mut().enumerate() {
                let mu_prev = if i + 1 == j { 1.0 } else { self.mu.get(i).copied().unwrap_or(0.0) };
                let d = self.beta[i + 1] * self.nu[i + 1] + self.alpha[i] * self.nu[i] - self.beta[j] * mu_prev;
                let hi = (self.alpha[i] * self.alpha[i] + self.beta[i] * self.beta[i]).sqrt();
                let t = self.eps1 * (hj + hi);
                *slot = (d + t.copysign(d)) / alpha_j;
            }
        }
        self.mu = next;
    }

    /// nu_{j+1,i} for i <= j, from
    /// beta_{j+1} nu_{j+1,i} = alpha_i mu_{j,i} + beta_i mu_{j,i-1} - alpha_j nu_{j,i}.
    fn update_nu(&mut self, j: usize, beta_next: f64) {
        let mut next = vec![0.0; j + 2];
        next[j + 1] = 1.0;
        if beta_next > 0.0 {
            let aj = self.alpha[j];
            let hj = (aj * aj + beta_next * beta_next).sqrt();
            for (i, slot) in next.iter_mut().take(j + 1).enumerate() {
                let mu_ji = if i == j { 1.0 } else { self.mu[i] };
                let mu_jim1 = if i == 0 { 0.0 } else { self.mu[i - 1] };
                let d = self.alpha[i] * mu_ji + self.beta[i] * mu_jim1 - aj * self.nu[i];
                let hi = (self.alpha[i] * self.alpha[i] + self.beta[i] * self.beta[i]).sqrt();
                let t = self.eps1 * (hj + hi);
                *slot = (d + t.copysign(d)) / beta_next;
            }
        }
        self.nu = next;
    }

    fn reset_estimates_u(&mut self, j: usize) {
        self.mu = vec![self.eps1; j];
    }

    fn reset_estimates_v(&mut self, j: usize) {
        self.nu = vec![self.eps1; j + 2];
        self.nu[j + 1] = 1.0;
    }

    /// A random unit vector orthogonal to the stored `u` (or `v`) basis.
    fn random_orthogonal(&mut self, len: usize, left: bool) -> Option<Vec<f64>> {
        let basis_len = if left { self.u.len() } else { self.v.len() };
        if basis_len >= len {
            return None;
        }
        for _ in 0..3 {
            let mut w: Vec<f64> = (0..len).map(|_| self.rng.random_range(-1.0..1.0)).collect();
            let before = norm2(&w);
            let basis = if left { &self.u } else { &self.v };
            let after = reorthogonalize(&mut w, basis);
            if after > 1e-3 * before {
                w.iter_mut().for_each(|x| *x /= after);
                return Some(w);
            }
        }
        None
    }

    fn ritz(&self) -> Result<Ritz> {
        let k = self.steps();
        let b = DenseMatrix::from_fn(k, k, |i, j| {
            if i == j {
                self.alpha[i]
            } else if j == i + 1 {
                self.beta[j]
            } else {
                0.0
            }
        });
        let svd = svd_dense(&b)?;
        let beta_k = self.beta[k];
        let residuals = (0..k).map(|i| (beta_k * svd.u[(k - 1, i)]).abs()).collect();
        Ok(Ritz { svd, residuals })
    }

    fn finish(&self, ritz: Ritz, s: usize) -> Result<PartialSvd> {
        let k = self.steps();
        let sigma1 = ritz.svd.sigma.first().copied().unwrap_or(0.0);
        let rank_tol = sigma1 * (self.m.max(self.n) as f64) * f64::EPSILON;
        let keep = ritz.svd.sigma[..s.min(k)]
            .iter()
            .take_while(|&&v| v > rank_tol && v > 0.0)
            .count();

        let combine = |basis: &[Vec<f64>], coeffs: &DenseMatrix, len: usize| -> Vec<Vec<f64>> {
            map_collect(self.params.exec, keep, |t| {
                let mut out = vec![0.0; len];
                for (i, b) in basis.iter().take(k).enumerate() {
                    axpy(coeffs[(i, t)], b, &mut out);
                }
                out
            })
        };
        let u_cols = combine(&self.u, &ritz.svd.u, self.m);
        let v_cols = combine(&self.v, &ritz.svd.v, self.n);
        let mut u = DenseMatrix::from_columns(self.m, &u_cols);
        let mut v = DenseMatrix::from_columns(self.n, &v_cols);
        let mut sigma = ritz.svd.sigma[..keep].to_vec();

        // Semi-orthogonal bases give Ritz vectors that are orthonormal only
        // to about sqrt(eps); a Rayleigh-Ritz pass on span(V) restores full
        // orthonormality.
        if keep > 0 && (u.orthonormality_error() > 1e-2 * ORTHONORMAL_TOL || v.orthonormality_error() > 1e-2 * ORTHONORMAL_TOL)
        {
            (u, sigma, v) = self.rayleigh_ritz(v_cols)?;
        }
        let keep = sigma.iter().take_while(|&&x| x > rank_tol && x > 0.0).count();
        if keep < sigma.len() {
            u = DenseMatrix::from_fn(self.m, keep, |i, t| u[(i, t)]);
            v = DenseMatrix::from_fn(self.n, keep, |i, t| v[(i, t)]);
            sigma.truncate(keep);
        }
        Ok(PartialSvd {
            triplets: LowRankMatrix::from_parts(u, sigma, v)?,
            requested: s,
            short: keep < s,
            lanczos_steps: k,
            reorthogonalizations: self.reorths,
        })
    }

    fn rayleigh_ritz(&self, mut v_cols: Vec<Vec<f64>>) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
        for t in 0..v_cols.len() {
            let (done, rest) = v_cols.split_at_mut(t);
            let nrm = reorthogonalize(&mut rest[0], done);
            rest[0].iter_mut().for_each(|x| *x /= nrm);
        }
        let exec = self.params.exec;
        let av: Vec<Vec<f64>> = map_collect(exec, v_cols.len(), |t| {
            let mut y = vec![0.0; self.m];
            self.op.apply_into(Execution::Sequential, &v_cols[t], &mut y);
            y
        });
        let w = DenseMatrix::from_columns(self.m, &av);
        let small = svd_dense(&w)?;
        let q = DenseMatrix::from_columns(self.n, &v_cols);
        let v = q.matmul(&small.v)?;
        Ok((small.u, small.sigma, v))
    }
}

/// Iterated classical Gram-Schmidt of `w` against `basis`; returns the
/// norm of the result.
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    let mut nrm = norm2(w);
    for _ in 0..3 {
        let before = nrm;
        let coeffs: Vec<f64> = basis.iter().map(|b| dot(b, w)).collect();
        for (c, b) in coeffs.iter().zip(basis) {
            axpy(-c, b, w);
        }
        nrm = norm2(w);
        if nrm > 0.5 * before {
            break;
        }
    }
    nrm
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}
