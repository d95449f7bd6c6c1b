//! Matrices supported on a fixed sampling set.
//!
//! The pattern is built once and shared (`Arc`) by every matrix living on
//! it: observations, the multiplier `Y`, residuals. Entries are stored in
//! row-major order, which doubles as a CSR layout; a column permutation is
//! kept alongside for transposed products.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{dot, norm2, DenseMatrix};
use crate::error::{Result, SvtError};
use crate::lowrank::LowRankMatrix;
use crate::par::{fill_indexed, Execution};

/// Seed of the start vector used by [`SampledMatrix::spectral_norm_est`].
const POWER_SEED: u64 = 0x5eed_0f_0e6a;
const POWER_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    row_ptr: Vec<usize>,
    col_ptr: Vec<usize>,
    /// Entry positions sorted by (col, row).
    col_order: Vec<usize>,
}

impl IndexSet {
    /// Builds the pattern from arbitrary-order pairs. Duplicates and
    /// out-of-range indices are rejected.
    pub fn new(n_rows: usize, n_cols: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n_rows || j >= n_cols) {
            return Err(SvtError::InvalidInput(format!(
                "index ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
            )));
        }
        if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(SvtError::InvalidInput(format!(
                "duplicate index ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self::from_sorted_unique(n_rows, n_cols, pairs))
    }

    pub(crate) fn from_sorted_unique(n_rows: usize, n_cols: usize, pairs: Vec<(usize, usize)>) -> Self {
        let (rows, cols): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let mut row_ptr = vec![0usize; n_rows + 1];
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_ptr = vec![0usize; n_cols + 1];
        for &j in &cols {
            col_ptr[j + 1] += 1;
        }
        for j in 0..n_cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut col_order = vec![0usize; rows.len()];
        for (pos, &j) in cols.iter().enumerate() {
            col_order[next[j]] = pos;
            next[j] += 1;
        }
        Self {
            n_rows,
            n_cols,
            rows,
            cols,
            row_ptr,
            col_ptr,
            col_order,
        }
    }

    /// Every index of an `n_rows x n_cols` matrix.
    pub fn full(n_rows: usize, n_cols: usize) -> Self {
        let pairs = (0..n_rows)
            .flat_map(|i| (0..n_cols).map(move |j| (i, j)))
            .collect();
        Self::from_sorted_unique(n_rows, n_cols, pairs)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().copied().zip(self.cols.iter().copied())
    }

    /// Entry positions belonging to row `i`.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Position of `(i, j)` in the entry list, if sampled.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n_rows {
            return None;
        }
        let range = self.row_range(i);
        self.cols[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.position(i, j).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrix {
    pattern: Arc<IndexSet>,
    values: Vec<f64>,
}

impl SampledMatrix {
    pub fn new(pattern: Arc<IndexSet>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.len() {
            return Err(SvtError::dims(format!(
                "{} values for a pattern of {} entries",
                values.len(),
                pattern.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SvtError::NonFinite(pos));
        }
        Ok(Self { pattern, values })
    }

    /// Builds from `(row, col, value)` triplets in any order.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let pattern = IndexSet::new(n_rows, n_cols, triplets.iter().map(|t| (t.0, t.1)).collect())?;
        let values = triplets.into_iter().map(|t| t.2).collect();
        Self::new(Arc::new(pattern), values)
    }

    pub fn zeros(pattern: Arc<IndexSet>) -> Self {
        let values = vec![0.0; pattern.len()];
        Self { pattern, values }
    }

    pub(crate) fn from_parts_unchecked(pattern: Arc<IndexSet>, values: Vec<f64>) -> Self {
        debug_assert_eq!(pattern.len(), values.len());
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<IndexSet> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// In-place access to the values; the pattern stays fixed.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pattern.shape()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn same_pattern(&self, other: &SampledMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows(), self.n_cols());
        for ((i, j), &v) in self.pattern.iter().zip(&self.values) {
            out[(i, j)] = v;
        }
        out
    }

    /// `y = S x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows()];
        self.apply_into(Execution::default(), x, &mut y)?;
        Ok(y)
    }

    /// `x = S^T y`.
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.n_cols()];
        self.apply_adjoint_into(Execution::default(), y, &mut x)?;
        Ok(x)
    }

    pub fn apply_into(&self, exec: Execution, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols() || y.len() != self.n_rows() {
            return Err(SvtError::dims(format!(
                "apply on {}x{} with x of length {} into y of length {}",
                self.n_rows(),
                self.n_cols(),
                x.len(),
                y.len()
            )));
        }
        let p = &*self.pattern;
        let vals = &self.values;
        fill_indexed(exec, y, |i| {
            let mut acc = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                acc += vals[k] * x[p.cols[k]];
            }
            acc
        });
        Ok(())
    }

    pub fn apply_adjoint_into(&self, exec: Execution, y: &[f64], x: &mut [f64]) -> Result<()> {
        if y.len() != self.n_rows() || x.len() != self.n_cols() {
            return Err(SvtError::dims(format!(
                "adjoint apply on {}x{} with y of length {} into x of length {}",
                self.n_rows(),
                self.n_cols(),
                y.len(),
                x.len()
            )));
        }
        let p = &*self.pattern;
        let vals = &self.values;
        fill_indexed(exec, x, |j| {
            let mut acc = 0.0;
            for &k in &p.col_order[p.col_ptr[j]..p.col_ptr[j + 1]] {
                acc += vals[k] * y[p.rows[k]];
            }
            acc
        });
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.values)
    }

    /// Largest singular value by power iteration on `S^T S`, stopped once
    /// successive estimates agree to relative `tol`.
    pub fn spectral_norm_est(&self, tol: f64) -> f64 {
        let n = self.n_cols();
        if self.values.iter().all(|&v| v == 0.0) || n == 0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut y = vec![0.0; self.n_rows()];
        let mut est = 0.0f64;
        let exec = Execution::default();
        for _ in 0..POWER_MAX_ITERS {
            self.apply_into(exec, &x, &mut y).expect("sizes fixed above");
            self.apply_adjoint_into(exec, &y, &mut x).expect("sizes fixed above");
            // ||S x_old||^2 = <x_old, S^T S x_old> with ||x_old|| = 1
            let next = norm2(&y);
            let nrm = norm2(&x);
            if nrm == 0.0 {
                return next;
            }
            x.iter_mut().for_each(|v| *v /= nrm);
            let done = (next - est).abs() <= tol * next;
            est = next;
            if done {
                break;
            }
        }
        est
    }

    /// `<self, other>` over a shared pattern.
    pub fn inner(&self, other: &SampledMatrix) -> Result<f64> {
        if !self.same_pattern(other) {
            return Err(SvtError::dims("inner product of matrices on different patterns"));
        }
        Ok(dot(&self.values, &other.values))
    }
}

/// Restriction of a dense matrix to `omega`.
pub fn project_dense(a: &DenseMatrix, omega: &Arc<IndexSet>) -> Result<SampledMatrix> {
    if a.shape() != omega.shape() {
        return Err(SvtError::dims(format!(
            "projecting a {}x{} matrix onto a {}x{} pattern",
            a.n_rows(),
            a.n_cols(),
            omega.n_rows,
            omega.n_cols
        )));
    }
    let values = omega.iter().map(|(i, j)| a[(i, j)]).collect();
    Ok(SampledMatrix::from_parts_unchecked(omega.clone(), values))
}

/// Restriction of a factored matrix to `omega`, without densifying it.
pub fn project_lowrank(x: &LowRankMatrix, omega: &Arc<IndexSet>) -> Result<SampledMatrix> {
    let zero = SampledMatrix::zeros(omega.clone());
    x.add_project(&zero, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::svd_dense;

    fn single(n_rows: usize, n_cols: usize, i: usize, j: usize, v: f64) -> SampledMatrix {
        SampledMatrix::from_triplets(n_rows, n_cols, vec![(i, j, v)]).unwrap()
    }

    fn random_sampled(n_rows: usize, n_cols: usize, density: f64, seed: u64) -> SampledMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n_rows {
            for j in 0..n_cols {
                if rng.random::<f64>() < density {
                    trip.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SampledMatrix::from_triplets(n_rows, n_cols, trip).unwrap()
    }

    #[test]
    fn project_examples() {
        let a = DenseMatrix::from_fn(3, 3, |i, j| (3 * i + j) as f64);
        let full = Arc::new(IndexSet::full(3, 3));
        assert_eq!(project_dense(&a, &full).unwrap().values(), a.as_slice());
        let empty = Arc::new(IndexSet::new(3, 3, vec![]).unwrap());
        assert!(project_dense(&a, &empty).unwrap().values().is_empty());
        let ones = DenseMatrix::from_fn(3, 3, |_, _| 1.0);
        let omega = Arc::new(IndexSet::new(3, 3, vec![(2, 1), (0, 0)]).unwrap());
        assert_eq!(project_dense(&ones, &omega).unwrap().values(), &[1.0, 1.0]);
        let wrong = DenseMatrix::zeros(2, 3);
        assert!(project_dense(&wrong, &omega).is_err());
    }

    #[test]
    fn apply_examples() {
        let s = single(3, 2, 0, 1, 2.0);
        assert_eq!(s.apply(&[0.0, 3.0]).unwrap(), vec![6.0, 0.0, 0.0]);
        assert_eq!(s.apply_adjoint(&[3.0, 0.0, 0.0]).unwrap(), vec![0.0, 6.0]);
        assert!(s.apply(&[1.0]).is_err());
        assert!(s.apply_adjoint(&[1.0]).is_err());

        let e = SampledMatrix::zeros(Arc::new(IndexSet::new(2, 2, vec![]).unwrap()));
        assert_eq!(e.apply(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(e.apply_adjoint(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn apply_matches_dense_oracle() {
        let s = random_sampled(37, 23, 0.3, 9);
        let d = s.to_dense();
        let x: Vec<f64> = (0..23).map(|k| (k as f64 * 0.37).sin()).collect();
        let y = s.apply(&x).unwrap();
        let y_ref = d.matvec(&x).unwrap();
        for (a, b) in y.iter().zip(&y_ref) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }
        let sts = s.apply_adjoint(&y).unwrap();
        let sts_ref = d.transpose().matvec(&y_ref).unwrap();
        for (a, b) in sts.iter().zip(&sts_ref) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let s = random_sampled(400, 300, 0.1, 4);
        let x: Vec<f64> = (0..300).map(|k| (k as f64).cos()).collect();
        let mut a = vec![0.0; 400];
        let mut b = vec![0.0; 400];
        s.apply_into(Execution::Sequential, &x, &mut a).unwrap();
        s.apply_into(Execution::Parallel, &x, &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = vec![0.0; 300];
        let mut d = vec![0.0; 300];
        s.apply_adjoint_into(Execution::Sequential, &a, &mut c).unwrap();
        s.apply_adjoint_into(Execution::Parallel, &a, &mut d).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn norm_examples() {
        let s = single(4, 4, 2, 3, 5.0);
        assert_eq!(s.frobenius_norm(), 5.0);
        assert!((s.spectral_norm_est(1e-6) - 5.0).abs() <= 1e-6 * 5.0);

        let d = SampledMatrix::from_triplets(2, 2, vec![(0, 0, 3.0), (1, 1, 4.0)]).unwrap();
        assert_eq!(d.frobenius_norm(), 5.0);
        assert!((d.spectral_norm_est(1e-6) - 4.0).abs() <= 1e-5 * 4.0);
    }

    #[test]
    fn spectral_estimate_matches_dense_svd() {
        let s = random_sampled(50, 40, 0.2, 11);
        let sigma1 = svd_dense(&s.to_dense()).unwrap().sigma[0];
        let est = s.spectral_norm_est(1e-6);
        assert!((est - sigma1).abs() <= 1e-5 * sigma1, "{est} vs {sigma1}");
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(IndexSet::new(2, 2, vec![(0, 1), (0, 1)]).is_err());
        assert!(IndexSet::new(2, 2, vec![(2, 0)]).is_err());
        let p = Arc::new(IndexSet::new(2, 2, vec![(0, 0)]).unwrap());
        assert!(SampledMatrix::new(p.clone(), vec![]).is_err());
        assert!(SampledMatrix::new(p, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn pattern_lookup() {
        let p = IndexSet::new(3, 4, vec![(2, 3), (0, 1), (2, 0)]).unwrap();
        assert_eq!(p.iter().collect::<Vec<_>>(), vec![(0, 1), (2, 0), (2, 3)]);
        assert_eq!(p.position(2, 3), Some(2));
        assert!(!p.contains(1, 1));
        assert_eq!(p.row_range(1), 1..1);
    }
}
