mod common;

use blockprec::block::{BlockMatrix, BlockVector, FieldLayout};
use blockprec::sparse::CsrMatrix;
use common::dense;
use proptest::prelude::*;

/// Random square block system with up to 4 fields of up to 30 unknowns;
/// roughly a third of the blocks are absent.
fn block_system() -> impl Strategy<Value = BlockMatrix> {
    prop::collection::vec(1usize..=30, 1..=4).prop_flat_map(|sizes| {
        let n = sizes.len();
        let blocks: Vec<_> = (0..n * n)
            .map(|k| {
                let (r, c) = (sizes[k / n], sizes[k % n]);
                let entry = (0..r, 0..c, -5.0f64..5.0);
                (
                    prop::bool::weighted(0.66),
                    prop::collection::vec(entry, 0..=(r * c).min(60)),
                )
                    .prop_map(move |(present, t)| {
                        present.then(|| CsrMatrix::from_triplets(r, c, &t).unwrap())
                    })
            })
            .collect();
        (Just(sizes), blocks).prop_map(|(sizes, blocks)| {
            BlockMatrix::square(FieldLayout::new(sizes).unwrap(), blocks).unwrap()
        })
    })
}

fn shuffled_groups(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut fields: Vec<usize> = (0..n).collect();
    let mut rng = blockprec::rng::Lcg64::new(seed);
    for i in (1..n).rev() {
        fields.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
    }
    let cut = 1 + (rng.next_u64() as usize) % n;
    let (a, b) = fields.split_at(cut.min(n));
    [a.to_vec(), b.to_vec()]
        .into_iter()
        .filter(|g| !g.is_empty())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_agrees_with_block_apply(a in block_system(), seed in any::<u64>()) {
        let v = common::pseudo_random(a.col_layout().total(), seed);
        let flat = a.flatten().spmv(&v).unwrap();
        let blocked = a.block_apply(&BlockVector::gather(&v, a.col_layout()).unwrap()).unwrap().scatter();
        for (x, y) in flat.iter().zip(&blocked) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(y.abs()).max(1.0));
        }
    }

    #[test]
    fn gather_scatter_round_trip(a in block_system(), seed in any::<u64>()) {
        let v = common::pseudo_random(a.row_layout().total(), seed);
        prop_assert_eq!(BlockVector::gather(&v, a.row_layout()).unwrap().scatter(), v);
    }

    #[test]
    fn merge_is_a_permutation(a in block_system(), seed in any::<u64>()) {
        let groups = shuffled_groups(a.n_fields(), seed);
        let merged = a.merge(&groups).unwrap();
        prop_assert_eq!(merged.row_layout().total(), a.row_layout().total());
        prop_assert_eq!(merged.nnz(), a.nnz());
        let perm = a.row_layout().permutation(&groups);
        let orig = dense(&a.flatten());
        let m = dense(&merged.flatten());
        for (r, &pr) in perm.iter().enumerate() {
            for (c, &pc) in perm.iter().enumerate() {
                prop_assert_eq!(m[(r, c)], orig[(pr, pc)]);
            }
        }
        // block_apply commutes with the permutation exactly
        let v = common::pseudo_random(perm.len(), seed ^ 1);
        let pv: Vec<f64> = perm.iter().map(|&p| v[p]).collect();
        let y = a.block_apply(&BlockVector::gather(&v, a.col_layout()).unwrap()).unwrap().scatter();
        let ym = merged.block_apply(&BlockVector::gather(&pv, merged.col_layout()).unwrap()).unwrap().scatter();
        let py: Vec<f64> = perm.iter().map(|&p| y[p]).collect();
        for (x, z) in ym.iter().zip(&py) {
            prop_assert!((x - z).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }
}

#[test]
fn trivial_partition_is_identity() {
    let layout = FieldLayout::new(vec![2, 1]).unwrap();
    let a = BlockMatrix::square(
        layout,
        vec![
            Some(CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]])),
            None,
            Some(CsrMatrix::from_dense(&[vec![4.0, 5.0]])),
            Some(CsrMatrix::identity(1)),
        ],
    )
    .unwrap();
    assert_eq!(a.merge(&[vec![0], vec![1]]).unwrap(), a);
}
