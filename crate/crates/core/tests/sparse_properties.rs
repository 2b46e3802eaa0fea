mod common;

use blockprec::dense::DenseLu;
use blockprec::sparse::{lumped_abs_rowsum, triple_product, CsrMatrix};
use common::{dense, dvec, rel_frobenius};
use proptest::prelude::*;

fn sparse(nrows: usize, ncols: usize) -> impl Strategy<Value = CsrMatrix> {
    let entry = (0..nrows, 0..ncols, -10.0f64..10.0);
    prop::collection::vec(entry, 0..=(nrows * ncols).min(200))
        .prop_map(move |t| CsrMatrix::from_triplets(nrows, ncols, &t).unwrap())
}

/// `(R, A, P)` with chained shapes up to 50 × 50.
fn galerkin_triple() -> impl Strategy<Value = (CsrMatrix, CsrMatrix, CsrMatrix)> {
    (1usize..=50, 1usize..=50, 1usize..=50)
        .prop_flat_map(|(nc, n, m)| (sparse(nc, n), sparse(n, m), sparse(m, nc)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triple_product_matches_dense((r, a, p) in galerkin_triple()) {
        let c = triple_product(&r, &a, &p).unwrap();
        let oracle = dense(&r) * dense(&a) * dense(&p);
        prop_assert!(rel_frobenius(&dense(&c), &oracle) <= 1e-13);
        // rows stay sorted and exact zeros are never stored
        for i in 0..c.nrows() {
            let (cols, vals) = c.row(i);
            prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(vals.iter().all(|&v| v != 0.0));
        }
    }

    #[test]
    fn matmul_matches_dense((a, b) in (1usize..30, 1usize..30, 1usize..30)
        .prop_flat_map(|(n, k, m)| (sparse(n, k), sparse(k, m)))) {
        let c = a.matmul(&b).unwrap();
        prop_assert!(rel_frobenius(&dense(&c), &(dense(&a) * dense(&b))) <= 1e-13);
    }

    #[test]
    fn transpose_is_an_involution(a in (1usize..40, 1usize..40).prop_flat_map(|(n, m)| sparse(n, m))) {
        prop_assert_eq!(&a.transpose().transpose(), &a);
        prop_assert_eq!(dense(&a.transpose()), dense(&a).transpose());
    }

    #[test]
    fn spmv_is_linear(
        (a, x, y) in (1usize..40, 1usize..40).prop_flat_map(|(n, m)| (
            sparse(n, m),
            prop::collection::vec(-1.0f64..1.0, m),
            prop::collection::vec(-1.0f64..1.0, m),
        )),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| alpha * u + beta * v).collect();
        let lhs = a.spmv(&combo).unwrap();
        let ax = a.spmv(&x).unwrap();
        let ay = a.spmv(&y).unwrap();
        let rhs: Vec<f64> = ax.iter().zip(&ay).map(|(u, v)| alpha * u + beta * v).collect();
        let diff = dvec(&lhs) - dvec(&rhs);
        // relative to the magnitudes that entered the sums
        let scale = dense(&a).abs().row_sum().max() * (alpha.abs() + beta.abs()).max(1.0);
        prop_assert!(diff.amax() <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn spmv_is_deterministic(a in (1usize..30, 1usize..30).prop_flat_map(|(n, m)| sparse(n, m))) {
        let x: Vec<f64> = (0..a.ncols()).map(|i| (i as f64).sin()).collect();
        prop_assert_eq!(a.spmv(&x).unwrap(), a.spmv(&x).unwrap());
    }

    #[test]
    fn lumped_rowsum_is_abs_sum(a in (1usize..30).prop_flat_map(|n| sparse(n, n))) {
        let d = dense(&a);
        match lumped_abs_rowsum(&a) {
            Ok(l) => {
                prop_assert_eq!(l.nnz(), a.nrows());
                for i in 0..a.nrows() {
                    let s: f64 = d.row(i).iter().map(|v| v.abs()).sum();
                    prop_assert!((l.get(i, i) - s).abs() <= 1e-14 * s);
                }
            }
            Err(_) => prop_assert!((0..a.nrows()).any(|i| d.row(i).iter().all(|&v| v == 0.0))),
        }
    }
}

#[test]
fn lu_solves_to_tolerance_on_conditioned_systems() {
    // graded diagonal plus coupling, condition number around 1e6
    let n = 40;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 10f64.powf(-6.0 * i as f64 / (n - 1) as f64) + 1e-3));
        if i + 1 < n {
            t.push((i, i + 1, 1e-3));
            t.push((i + 1, i, -2e-3));
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
    let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
    let x = DenseLu::factor(&a).unwrap().solve(&b).unwrap();
    let r = dvec(&b) - dense(&a) * dvec(&x);
    assert!(r.norm() <= 1e-10 * dvec(&b).norm());
}
