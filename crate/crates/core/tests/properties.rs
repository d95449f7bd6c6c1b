use std::sync::Arc;

use proptest::prelude::*;
use svt_core::dense::{svd_dense, DenseMatrix};
use svt_core::par::Execution;
use svt_core::sampled::{project_dense, IndexSet, SampledMatrix};
use svt_core::shrink::shrink_dense;

fn dense(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn sized_dense() -> impl Strategy<Value = DenseMatrix> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| dense(r, c))
}

fn pair_same_shape() -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| (dense(r, c), dense(r, c)))
}

/// Random pattern with its values, given as the dense matrix and a mask.
fn sampled() -> impl Strategy<Value = (SampledMatrix, Vec<f64>, Vec<f64>)> {
    (1usize..12, 1usize..12).prop_flat_map(|(r, c)| {
        (
            prop::collection::vec((any::<bool>(), -5.0f64..5.0), r * c),
            prop::collection::vec(-5.0f64..5.0, c),
            prop::collection::vec(-5.0f64..5.0, r),
        )
            .prop_map(move |(cells, x, y)| {
                let trip: Vec<_> = cells
                    .iter()
                    .enumerate()
                    .filter(|(_, (keep, _))| *keep)
                    .map(|(k, &(_, v))| (k / c, k % c, v))
                    .collect();
                (SampledMatrix::from_triplets(r, c, trip).unwrap(), x, y)
            })
    })
}

fn nuclear(a: &DenseMatrix) -> f64 {
    svd_dense(a).unwrap().sigma.iter().sum()
}

fn prox_objective(x: &DenseMatrix, y: &DenseMatrix, tau: f64) -> f64 {
    let d = x.sub(y).unwrap().frobenius_norm();
    tau * nuclear(x) + 0.5 * d * d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shrinkage_minimises_prox_objective(
        (y, z) in pair_same_shape(),
        tau in 0.05f64..4.0,
        t in 1e-3f64..1.0,
    ) {
        let x = shrink_dense(&y, tau).unwrap().x.to_dense().unwrap();
        let moved = x.add(&z.scale(t)).unwrap();
        let f0 = prox_objective(&x, &y, tau);
        let f1 = prox_objective(&moved, &y, tau);
        prop_assert!(f0 <= f1 + 1e-9 * (1.0 + f0.abs()), "f(X) = {f0}, f(X + tZ) = {f1}");
    }

    #[test]
    fn shrinkage_is_nonexpansive((a, b) in pair_same_shape(), tau in 0.0f64..4.0) {
        let da = shrink_dense(&a, tau).unwrap().x.to_dense().unwrap();
        let db = shrink_dense(&b, tau).unwrap().x.to_dense().unwrap();
        let lhs = da.sub(&db).unwrap().frobenius_norm();
        let rhs = a.sub(&b).unwrap().frobenius_norm();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn shrinkage_rank_falls_with_tau(y in sized_dense(), t1 in 0.0f64..4.0, t2 in 0.0f64..4.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let r_lo = shrink_dense(&y, lo).unwrap().rank;
        let r_hi = shrink_dense(&y, hi).unwrap().rank;
        prop_assert!(r_lo >= r_hi);
    }

    #[test]
    fn shrinkage_at_zero_is_identity(y in sized_dense()) {
        let x = shrink_dense(&y, 0.0).unwrap().x.to_dense().unwrap();
        prop_assert!(x.sub(&y).unwrap().frobenius_norm() <= 1e-10 * (1.0 + y.frobenius_norm()));
    }

    #[test]
    fn sampled_adjoint_identity((s, x, y) in sampled()) {
        let ax = s.apply(&x).unwrap();
        let aty = s.apply_adjoint(&y).unwrap();
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &aty);
        let scale = 1.0 + s.frobenius_norm() * dot(&x, &x).sqrt() * dot(&y, &y).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn sampled_products_match_dense((s, x, y) in sampled()) {
        let d = s.to_dense();
        let ax = s.apply(&x).unwrap();
        let dx = d.matvec(&x).unwrap();
        for (p, q) in ax.iter().zip(&dx) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
        let aty = s.apply_adjoint(&y).unwrap();
        let dty = d.transpose().matvec(&y).unwrap();
        for (p, q) in aty.iter().zip(&dty) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise((s, x, y) in sampled()) {
        let mut seq = vec![0.0; s.n_rows()];
        let mut par = vec![0.0; s.n_rows()];
        s.apply_into(Execution::Sequential, &x, &mut seq).unwrap();
        s.apply_into(Execution::Parallel, &x, &mut par).unwrap();
        prop_assert_eq!(seq, par);
        let mut seq = vec![0.0; s.n_cols()];
        let mut par = vec![0.0; s.n_cols()];
        s.apply_adjoint_into(Execution::Sequential, &y, &mut seq).unwrap();
        s.apply_adjoint_into(Execution::Parallel, &y, &mut par).unwrap();
        prop_assert_eq!(seq, par);
    }

    #[test]
    fn projection_is_idempotent((s, _x, _y) in sampled(), fill in -2.0f64..2.0) {
        let (r, c) = s.shape();
        let a = DenseMatrix::from_fn(r, c, |i, j| fill * (i as f64 + 1.0) - j as f64);
        let once = project_dense(&a, s.pattern()).unwrap();
        let twice = project_dense(&once.to_dense(), s.pattern()).unwrap();
        prop_assert_eq!(once.values(), twice.values());
        for ((i, j), v) in s.pattern().iter().zip(once.values()) {
            prop_assert_eq!(*v, a[(i, j)]);
        }
    }

    #[test]
    fn sampled_inner_obeys_cauchy_schwarz((s, _x, _y) in sampled(), shift in -3.0f64..3.0) {
        let other: Vec<f64> = s.values().iter().map(|v| v * v - shift).collect();
        let t = SampledMatrix::new(Arc::clone(s.pattern()), other).unwrap();
        let ip = s.inner(&t).unwrap();
        prop_assert!(ip.abs() <= s.frobenius_norm() * t.frobenius_norm() * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn full_pattern_projection_is_identity() {
    let a = DenseMatrix::from_fn(4, 5, |i, j| (i * 5 + j) as f64 - 7.5);
    let full = Arc::new(IndexSet::full(4, 5));
    let p = project_dense(&a, &full).unwrap();
    assert_eq!(p.to_dense().as_slice(), a.as_slice());
}
