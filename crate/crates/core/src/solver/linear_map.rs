use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::{dot, DenseMatrix};
use crate::error::{Result, SvtError};
use crate::lanczos::{top_singular_triplets, PartialSvdParams};
use crate::lowrank::LowRankMatrix;
use crate::sampled::{project_lowrank, IndexSet, SampledMatrix};

/// `A*(y)`, kept sparse when the map only touches a few entries.
#[derive(Debug, Clone)]
pub enum AdjointImage {
    Sampled(SampledMatrix),
    Dense(DenseMatrix),
}

impl AdjointImage {
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            AdjointImage::Sampled(s) => s.to_dense(),
            AdjointImage::Dense(d) => d.clone(),
        }
    }

    pub fn spectral_norm_est(&self) -> Result<f64> {
        match self {
            AdjointImage::Sampled(s) => Ok(s.spectral_norm_est(1e-10)),
            AdjointImage::Dense(d) => {
                let t = top_singular_triplets(d, 1, &PartialSvdParams::default())?;
                Ok(t.triplets.sigma().first().copied().unwrap_or(0.0))
            }
        }
    }
}

/// A linear map from `n1 x n2` matrices to `R^len`.
pub trait LinearMap: Sync {
    fn shape(&self) -> (usize, usize);
    fn len(&self) -> usize;
    fn apply(&self, x: &LowRankMatrix) -> Result<Vec<f64>>;
    fn adjoint(&self, y: &[f64]) -> Result<AdjointImage>;
    /// Upper bound on the operator norm.
    fn op_norm_bound(&self) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_len(map: &dyn LinearMap, y: &[f64]) -> Result<()> {
    if y.len() != map.len() {
        return Err(SvtError::dims(format!(
            "vector of length {} for a map with {} outputs",
            y.len(),
            map.len()
        )));
    }
    Ok(())
}

fn check_shape(map: &dyn LinearMap, x: &LowRankMatrix) -> Result<()> {
    if x.shape() != map.shape() {
        return Err(SvtError::dims(format!(
            "{}x{} matrix for a map on {}x{}",
            x.n1(),
            x.n2(),
            map.shape().0,
            map.shape().1
        )));
    }
    Ok(())
}

/// `X -> (X_ij)_{(i,j) in Omega}`.
#[derive(Debug, Clone)]
pub struct SamplingOperator {
    omega: Arc<IndexSet>,
}

impl SamplingOperator {
    pub fn new(omega: Arc<IndexSet>) -> Self {
        Self { omega }
    }

    pub fn omega(&self) -> &Arc<IndexSet> {
        &self.omega
    }
}

impl LinearMap for SamplingOperator {
    fn shape(&self) -> (usize, usize) {
        self.omega.shape()
    }

    fn len(&self) -> usize {
        self.omega.len()
    }

    fn apply(&self, x: &LowRankMatrix) -> Result<Vec<f64>> {
        check_shape(self, x)?;
        Ok(project_lowrank(x, &self.omega)?.into_values())
    }

    fn adjoint(&self, y: &[f64]) -> Result<AdjointImage> {
        check_len(self, y)?;
        Ok(AdjointImage::Sampled(SampledMatrix::new(self.omega.clone(), y.to_vec())?))
    }

    fn op_norm_bound(&self) -> f64 {
        if self.omega.is_empty() {
            0.0
        } else {
            1.0
        }
    }
}

/// One sparse functional `X -> sum w X_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub terms: Vec<(usize, usize, f64)>,
}

/// A stack of sparse functionals. The adjoint lives on the union of the
/// entries they touch.
#[derive(Debug, Clone)]
pub struct EntryFunctionals {
    n1: usize,
    n2: usize,
    functionals: Vec<Functional>,
    support: Arc<IndexSet>,
    /// For every term, its position in `support`.
    slots: Vec<Vec<usize>>,
    norm: f64,
}

impl EntryFunctionals {
    pub fn new(n1: usize, n2: usize, functionals: Vec<Functional>) -> Result<Self> {
        let mut pairs = Vec::new();
        for f in &functionals {
            for &(i, j, w) in &f.terms {
                if i >= n1 || j >= n2 {
                    return Err(SvtError::InvalidInput(format!(
                        "functional term ({i}, {j}) outside a {n1}x{n2} matrix"
                    )));
                }
                if !w.is_finite() {
                    return Err(SvtError::InvalidInput(format!("non-finite weight at ({i}, {j})")));
                }
                pairs.push((i, j));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let support = Arc::new(IndexSet::from_sorted_unique(n1, n2, pairs));
        let slots: Vec<Vec<usize>> = functionals
            .iter()
            .map(|f| {
                f.terms
                    .iter()
                    .map(|&(i, j, _)| support.position(i, j).expect("term is in the support"))
                    .collect()
            })
            .collect();
        let mut out = Self {
            n1,
            n2,
            functionals,
            support,
            slots,
            norm: 0.0,
        };
        out.norm = out.compute_norm()?;
        Ok(out)
    }

    /// All entries of an `n1 x n2` matrix, in row-major order.
    pub fn full_vectorization(n1: usize, n2: usize) -> Result<Self> {
        let functionals = (0..n1 * n2)
            .map(|k| Functional {
                terms: vec![(k / n2, k % n2, 1.0)],
            })
            .collect();
        Self::new(n1, n2, functionals)
    }

    /// `[A; -A]`, so that `A(X) >= b` and `-A(X) >= -b` pin `A(X) = b`.
    pub fn paired(&self) -> Result<Self> {
        let negated = self.functionals.iter().map(|f| Functional {
            terms: f.terms.iter().map(|&(i, j, w)| (i, j, -w)).collect(),
        });
        let all = self.functionals.iter().cloned().chain(negated).collect();
        Self::new(self.n1, self.n2, all)
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    /// The map as a `len x |support|` sparse matrix, whose largest singular
    /// value is the operator norm.
    fn compute_norm(&self) -> Result<f64> {
        if self.functionals.is_empty() || self.support.is_empty() {
            return Ok(0.0);
        }
        let mut trip = Vec::new();
        for (k, (f, slots)) in self.functionals.iter().zip(&self.slots).enumerate() {
            for (&(_, _, w), &s) in f.terms.iter().zip(slots) {
                trip.push((k, s, w));
            }
        }
        // repeated entries inside one functional are summed
        trip.sort_by_key(|t| (t.0, t.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(trip.len());
        for t in trip {
            match merged.last_mut() {
                Some(last) if last.0 == t.0 && last.1 == t.1 => last.2 += t.2,
                _ => merged.push(t),
            }
        }
        let mat = SampledMatrix::from_triplets(self.functionals.len(), self.support.len(), merged)?;
        let top = top_singular_triplets(&mat, 1, &PartialSvdParams::default())?;
        let sigma = top.triplets.sigma().first().copied().unwrap_or(0.0);
        Ok(sigma * (1.0 + 1e-6))
    }
}

impl LinearMap for EntryFunctionals {
    fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    fn len(&self) -> usize {
        self.functionals.len()
    }

    fn apply(&self, x: &LowRankMatrix) -> Result<Vec<f64>> {
        check_shape(self, x)?;
        let entries = project_lowrank(x, &self.support)?;
        let vals = entries.values();
        Ok(self
            .functionals
            .iter()
            .zip(&self.slots)
            .map(|(f, slots)| f.terms.iter().zip(slots).map(|(&(_, _, w), &s)| w * vals[s]).sum())
            .collect())
    }

    fn adjoint(&self, y: &[f64]) -> Result<AdjointImage> {
        check_len(self, y)?;
        let mut vals = vec![0.0; self.support.len()];
        for ((f, slots), &yk) in self.functionals.iter().zip(&self.slots).zip(y) {
            for (&(_, _, w), &s) in f.terms.iter().zip(slots) {
                vals[s] += yk * w;
            }
        }
        Ok(AdjointImage::Sampled(SampledMatrix::new(self.support.clone(), vals)?))
    }

    fn op_norm_bound(&self) -> f64 {
        self.norm
    }
}

/// Dense measurements `X -> (<G_k, X>)_k`.
#[derive(Debug, Clone)]
pub struct DenseMeasurements {
    n1: usize,
    n2: usize,
    /// One row per measurement, each a row-major `n1 x n2` matrix.
    g: DenseMatrix,
    norm: f64,
}

impl DenseMeasurements {
    pub fn new(n1: usize, n2: usize, g: DenseMatrix) -> Result<Self> {
        if g.n_cols() != n1 * n2 {
            return Err(SvtError::dims(format!(
                "measurement rows of length {} for a {n1}x{n2} matrix",
                g.n_cols()
            )));
        }
        let norm = if g.n_rows() == 0 {
            0.0
        } else {
            let top = top_singular_triplets(&g, 1, &PartialSvdParams::default())?;
            top.triplets.sigma().first().copied().unwrap_or(0.0) * (1.0 + 1e-6)
        };
        Ok(Self { n1, n2, g, norm })
    }
}

impl LinearMap for DenseMeasurements {
    fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    fn len(&self) -> usize {
        self.g.n_rows()
    }

    fn apply(&self, x: &LowRankMatrix) -> Result<Vec<f64>> {
        check_shape(self, x)?;
        let xd = x.to_dense()?;
        Ok((0..self.g.n_rows()).map(|k| dot(self.g.row(k), xd.as_slice())).collect())
    }

    fn adjoint(&self, y: &[f64]) -> Result<AdjointImage> {
        check_len(self, y)?;
        let mut out = vec![0.0; self.n1 * self.n2];
        for (k, &yk) in y.iter().enumerate() {
            crate::dense::axpy(yk, self.g.row(k), &mut out);
        }
        Ok(AdjointImage::Dense(DenseMatrix::new(self.n1, self.n2, out)?))
    }

    fn op_norm_bound(&self) -> f64 {
        self.norm
    }
}
