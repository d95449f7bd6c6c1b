//! Factored matrices `U diag(sigma) V^T`.

use crate::dense::{dot, DenseMatrix};
use crate::error::{Result, SvtError};
use crate::par::{fill_indexed, Execution};
use crate::sampled::SampledMatrix;

/// Default cap on `n1 * n2` for densification.
pub const DEFAULT_DENSIFY_CAP: usize = 25_000_000;

/// Orthonormality tolerance enforced by [`LowRankMatrix::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankMatrix {
    u: DenseMatrix,
    sigma: Vec<f64>,
    v: DenseMatrix,
}

impl LowRankMatrix {
    /// Validates shapes, positivity and ordering of `sigma`, and
    /// orthonormality of both factors.
    pub fn new(u: DenseMatrix, sigma: Vec<f64>, v: DenseMatrix) -> Result<Self> {
        let x = Self::from_parts(u, sigma, v)?;
        let eu = x.u.orthonormality_error();
        let ev = x.v.orthonormality_error();
        if eu > ORTHONORMAL_TOL || ev > ORTHONORMAL_TOL {
            return Err(SvtError::InvalidInput(format!(
                "factors are not orthonormal (U: {eu:.3e}, V: {ev:.3e})"
            )));
        }
        Ok(x)
    }

    /// Same as [`LowRankMatrix::new`] without the orthonormality check;
    /// for factors that come straight out of an SVD.
    pub(crate) fn from_parts(u: DenseMatrix, sigma: Vec<f64>, v: DenseMatrix) -> Result<Self> {
        let r = sigma.len();
        if u.n_cols() != r || v.n_cols() != r {
            return Err(SvtError::dims(format!(
                "rank {r} with U {}x{} and V {}x{}",
                u.n_rows(),
                u.n_cols(),
                v.n_rows(),
                v.n_cols()
            )));
        }
        if r > u.n_rows().min(v.n_rows()) {
            return Err(SvtError::dims(format!(
                "rank {r} exceeds min({}, {})",
                u.n_rows(),
                v.n_rows()
            )));
        }
        if sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(SvtError::InvalidInput("singular values must be positive and finite".into()));
        }
        if sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(SvtError::InvalidInput("singular values must be nonincreasing".into()));
        }
        Ok(Self { u, sigma, v })
    }

    pub fn zero(n1: usize, n2: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(n1, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(n2, 0),
        }
    }

    /// Builds a factored matrix from `A = L R^T` with arbitrary factors by
    /// orthogonalising through dense SVDs of the small side.
    pub fn from_product(left: &DenseMatrix, right: &DenseMatrix) -> Result<Self> {
        if left.n_cols() != right.n_cols() {
            return Err(SvtError::dims("factor inner dimensions differ"));
        }
        let (n1, n2) = (left.n_rows(), right.n_rows());
        if left.n_cols() == 0 {
            return Ok(Self::zero(n1, n2));
        }
        // L = Ql Rl, R = Qr Rr with thin SVDs standing in for QR.
        let l = crate::dense::svd_dense(left)?;
        let r = crate::dense::svd_dense(right)?;
        let k = left.n_cols().min(n1);
        let kr = right.n_cols().min(n2);
        // core = diag(sl) Vl^T Vr diag(sr), of size k x kr
        let vl_t_vr = l.v.t_matmul(&r.v)?;
        let core = DenseMatrix::from_fn(k, kr, |a, b| l.sigma[a] * vl_t_vr[(a, b)] * r.sigma[b]);
        let c = crate::dense::svd_dense(&core)?;
        let keep = c
            .sigma
            .iter()
            .take_while(|&&s| s > c.sigma.first().copied().unwrap_or(0.0) * 1e-14 && s > 0.0)
            .count();
        let u = l.u.matmul(&c.u)?;
        let v = r.u.matmul(&c.v)?;
        let u = DenseMatrix::from_fn(n1, keep, |i, t| u[(i, t)]);
        let v = DenseMatrix::from_fn(n2, keep, |j, t| v[(j, t)]);
        Self::from_parts(u, c.sigma[..keep].to_vec(), v)
    }

    pub fn transpose(self) -> Self {
        Self {
            u: self.v,
            sigma: self.sigma,
            v: self.u,
        }
    }

    pub fn n1(&self) -> usize {
        self.u.n_rows()
    }

    pub fn n2(&self) -> usize {
        self.v.n_rows()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1(), self.n2())
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// `tau ||X||_* + ||X||_F^2 / 2`.
    pub fn proximal_objective(&self, tau: f64) -> f64 {
        self.sigma.iter().map(|s| tau * s + 0.5 * s * s).sum()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let ur = self.u.row(i);
        let vr = self.v.row(j);
        (0..self.rank()).map(|t| ur[t] * self.sigma[t] * vr[t]).sum()
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        self.to_dense_capped(DEFAULT_DENSIFY_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DenseMatrix> {
        let (n1, n2) = self.shape();
        let size = n1.saturating_mul(n2);
        if size > cap {
            return Err(SvtError::SizeCap {
                what: "densification (n1*n2)",
                requested: size,
                cap,
            });
        }
        let us = self.scaled_u();
        let r = self.rank();
        let mut out = DenseMatrix::zeros(n1, n2);
        let data = out.as_mut_slice();
        for i in 0..n1 {
            let ur = &us[i * r..(i + 1) * r];
            for j in 0..n2 {
                data[i * n2 + j] = dot(ur, self.v.row(j));
            }
        }
        Ok(out)
    }

    /// `U diag(sigma)` as a flat row-major buffer.
    fn scaled_u(&self) -> Vec<f64> {
        let r = self.rank();
        let mut us = self.u.as_slice().to_vec();
        for row in us.chunks_mut(r.max(1)) {
            for (x, s) in row.iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us
    }

    /// `S + sign * P_Omega(X)` on the pattern of `S`, in `O(|Omega| r)`.
    pub fn add_project(&self, s: &SampledMatrix, sign: f64) -> Result<SampledMatrix> {
        let mut values = vec![0.0; s.nnz()];
        self.add_project_into(s, sign, &mut values, Execution::default())?;
        Ok(SampledMatrix::from_parts_unchecked(s.pattern().clone(), values))
    }

    /// Writes `S + sign * P_Omega(X)` into `out`, aligned with the pattern of `S`.
    pub fn add_project_into(&self, s: &SampledMatrix, sign: f64, out: &mut [f64], exec: Execution) -> Result<()> {
        if s.shape() != self.shape() {
            return Err(SvtError::dims(format!(
                "low-rank {}x{} against sampled {}x{}",
                self.n1(),
                self.n2(),
                s.n_rows(),
                s.n_cols()
            )));
        }
        if out.len() != s.nnz() {
            return Err(SvtError::dims("output buffer does not match the pattern"));
        }
        let base = s.values();
        let r = self.rank();
        if r == 0 {
            out.copy_from_slice(base);
            return Ok(());
        }
        let us = self.scaled_u();
        let pattern = s.pattern();
        let rows = pattern.rows();
        let cols = pattern.cols();
        let v = &self.v;
        fill_indexed(exec, out, |k| {
            let i = rows[k];
            base[k] + sign * dot(&us[i * r..(i + 1) * r], v.row(cols[k]))
        });
        Ok(())
    }

    /// `||self - other||_F` from the factors.
    ///
    /// Both column spaces are orthogonalised jointly so the difference is
    /// formed as a small core matrix; this avoids the cancellation of
    /// `||X||^2 + ||M||^2 - 2 <X, M>` when the two are close.
    pub fn distance(&self, other: &LowRankMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(SvtError::dims("distance between differently shaped matrices"));
        }
        let ru = stacked_r_factor(&self.u, &other.u);
        let rv = stacked_r_factor(&self.v, &other.v);
        let weights: Vec<f64> = self
            .sigma
            .iter()
            .copied()
            .chain(other.sigma.iter().map(|s| -s))
            .collect();
        // core = R_u diag(weights) R_v^T
        let mut acc = 0.0;
        for a in 0..ru.len() {
            for b in 0..rv.len() {
                let c: f64 = (0..weights.len()).map(|t| ru[a][t] * weights[t] * rv[b][t]).sum();
                acc += c * c;
            }
        }
        Ok(acc.sqrt())
    }

    /// Frobenius inner product computed from the factors.
    pub fn inner(&self, other: &LowRankMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(SvtError::dims("inner product of differently shaped matrices"));
        }
        if self.rank() == 0 || other.rank() == 0 {
            return Ok(0.0);
        }
        let uu = self.u.t_matmul(&other.u)?;
        let vv = self.v.t_matmul(&other.v)?;
        let mut acc = 0.0;
        for a in 0..self.rank() {
            for b in 0..other.rank() {
                acc += self.sigma[a] * other.sigma[b] * uu[(a, b)] * vv[(a, b)];
            }
        }
        Ok(acc)
    }
}

/// Rows of the R factor of `[a, b]` (modified Gram-Schmidt, dependent
/// columns dropped), so that `[a, b] = Q R` with `Q` orthonormal.
fn stacked_r_factor(a: &DenseMatrix, b: &DenseMatrix) -> Vec<Vec<f64>> {
    let n = a.n_rows();
    let cols: Vec<Vec<f64>> = (0..a.n_cols())
        .map(|j| a.column(j))
        .chain((0..b.n_cols()).map(|j| b.column(j)))
        .collect();
    let total = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut r: Vec<Vec<f64>> = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let mut w = col.clone();
        let start = crate::dense::norm2(&w);
        let mut coeffs = vec![0.0; q.len()];
        for _ in 0..2 {
            for (t, qt) in q.iter().enumerate() {
                let c = dot(qt, &w);
                coeffs[t] += c;
                crate::dense::axpy(-c, qt, &mut w);
            }
        }
        for (t, c) in coeffs.into_iter().enumerate() {
            r[t][j] = c;
        }
        let nrm = crate::dense::norm2(&w);
        if nrm > 1e-13 * start.max(f64::MIN_POSITIVE) && nrm > 0.0 {
            let mut row = vec![0.0; total];
            row[j] = nrm;
            r.push(row);
            q.push(w.into_iter().map(|x| x / nrm).collect());
        }
        debug_assert!(q.iter().all(|v| v.len() == n));
    }
    r
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dense::svd_dense;
    use crate::sampled::{project_dense, IndexSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    pub(crate) fn random_lowrank(n1: usize, n2: usize, r: usize, seed: u64) -> LowRankMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = DenseMatrix::from_fn(n1, r, |_, _| rng.random_range(-1.0..1.0));
        let rr = DenseMatrix::from_fn(n2, r, |_, _| rng.random_range(-1.0..1.0));
        LowRankMatrix::from_product(&l, &rr).unwrap()
    }

    #[test]
    fn zero_rank_densifies_to_zero() {
        let z = LowRankMatrix::zero(3, 4);
        assert_eq!(z.to_dense().unwrap(), DenseMatrix::zeros(3, 4));
    }

    #[test]
    fn single_entry() {
        let mut e1 = DenseMatrix::zeros(3, 1);
        e1[(0, 0)] = 1.0;
        let mut f1 = DenseMatrix::zeros(2, 1);
        f1[(0, 0)] = 1.0;
        let x = LowRankMatrix::new(e1, vec![2.0], f1).unwrap();
        let d = x.to_dense().unwrap();
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d.frobenius_norm(), 2.0);
    }

    #[test]
    fn roundtrip_through_dense_svd() {
        let x = random_lowrank(12, 9, 3, 2);
        let svd = svd_dense(&x.to_dense().unwrap()).unwrap();
        for (a, b) in svd.sigma.iter().zip(x.sigma()) {
            assert!((a - b).abs() <= 1e-9 * x.sigma()[0]);
        }
        assert!(svd.sigma[3] <= 1e-9 * x.sigma()[0]);
    }

    #[test]
    fn densify_cap() {
        let x = LowRankMatrix::zero(100, 100);
        assert!(matches!(x.to_dense_capped(99), Err(SvtError::SizeCap { .. })));
    }

    #[test]
    fn validation() {
        let i = DenseMatrix::identity(2);
        assert!(LowRankMatrix::new(i.clone(), vec![1.0, 2.0], i.clone()).is_err());
        assert!(LowRankMatrix::new(i.clone(), vec![1.0, 0.0], i.clone()).is_err());
        let skew = DenseMatrix::from_fn(2, 2, |_, _| 1.0);
        assert!(LowRankMatrix::new(skew, vec![2.0, 1.0], i).is_err());
    }

    #[test]
    fn add_project_examples() {
        let s = SampledMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 2, -2.0)]).unwrap();
        let z = LowRankMatrix::zero(3, 3);
        assert_eq!(z.add_project(&s, 1.0).unwrap(), s);

        let x = random_lowrank(3, 3, 1, 5);
        let zero_vals = SampledMatrix::zeros(s.pattern().clone());
        let out = x.add_project(&zero_vals, 1.0).unwrap();
        let (u, v) = (x.u().column(0), x.v().column(0));
        for ((i, j), &val) in s.pattern().iter().zip(out.values()) {
            let expect = u[i] * x.sigma()[0] * v[j];
            assert!((val - expect).abs() <= 1e-15);
        }
        let wrong = SampledMatrix::zeros(Arc::new(IndexSet::new(2, 3, vec![]).unwrap()));
        assert!(x.add_project(&wrong, 1.0).is_err());
    }

    #[test]
    fn add_project_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = random_lowrank(30, 20, 2, 8);
        let pairs: Vec<_> = (0..30)
            .flat_map(|i| (0..20).map(move |j| (i, j)))
            .filter(|_| rng.random::<f64>() < 0.3)
            .collect();
        let omega = Arc::new(IndexSet::new(30, 20, pairs).unwrap());
        let vals: Vec<f64> = (0..omega.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = SampledMatrix::new(omega.clone(), vals).unwrap();
        let dense_x = project_dense(&x.to_dense().unwrap(), &omega).unwrap();
        for sign in [1.0, -1.0] {
            let fast = x.add_project(&s, sign).unwrap();
            for ((a, b), c) in fast.values().iter().zip(s.values()).zip(dense_x.values()) {
                assert!((a - (b + sign * c)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn distance_matches_dense() {
        let a = random_lowrank(20, 13, 3, 3);
        let b = random_lowrank(20, 13, 4, 4);
        let dense = a.to_dense().unwrap().sub(&b.to_dense().unwrap()).unwrap().frobenius_norm();
        assert!((a.distance(&b).unwrap() - dense).abs() <= 1e-12 * dense);
        assert!(a.distance(&a).unwrap() <= 1e-14 * a.frobenius_norm());
        let z = LowRankMatrix::zero(20, 13);
        assert!((a.distance(&z).unwrap() - a.frobenius_norm()).abs() <= 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn factored_inner_matches_dense() {
        let a = random_lowrank(15, 11, 3, 1);
        let b = random_lowrank(15, 11, 2, 2);
        let dense = a.to_dense().unwrap().inner(&b.to_dense().unwrap()).unwrap();
        assert!((a.inner(&b).unwrap() - dense).abs() <= 1e-12 * dense.abs().max(1.0));
    }
}
