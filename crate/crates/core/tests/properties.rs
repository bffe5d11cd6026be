//! Property tests for the crate-wide invariants.

use proptest::prelude::*;

use pite::dataset::{load_csv, split, write_csv, CausalDataset, GroundTruth, LoadOptions, SplitSpec};
use pite::gradcheck::finite_diff_grad;
use pite::matrix::{pairwise_sq_dist, Matrix};
use pite::prototypes::{align_loss, diversity_loss, PrototypeSet};
use pite::rng::RngStream;

fn finite_f64() -> impl Strategy<Value = f64> {
    (-1e3..1e3f64).prop_map(|v| (v * 64.0).round() / 64.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pairwise_distances_nonnegative_zero_iff_equal(
        rows in prop::collection::vec(prop::collection::vec(finite_f64(), 3), 1..8),
    ) {
        let m = Matrix::from_rows(&rows).unwrap();
        let d = pairwise_sq_dist(&m, &m).unwrap();
        for i in 0..m.rows() {
            for j in 0..m.rows() {
                prop_assert!(d.get(i, j) >= 0.0);
                let coincide = m.row(i) == m.row(j);
                if coincide {
                    prop_assert!(d.get(i, j) <= 1e-12);
                } else {
                    prop_assert!(d.get(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn rng_streams_with_equal_seeds_agree(seed in any::<u64>()) {
        let mut a = RngStream::new(seed);
        let mut b = RngStream::new(seed);
        for _ in 0..64 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn finite_difference_matches_quadratic_gradient(
        coeffs in prop::collection::vec(0.1..4.0f64, 4),
        at in prop::collection::vec(-3.0..3.0f64, 4),
    ) {
        let point = Matrix::from_rows(std::slice::from_ref(&at)).unwrap();
        let c = coeffs.clone();
        let grad = finite_diff_grad(
            |m| m.row(0).iter().zip(c.iter()).map(|(&x, &a)| a * x * x).sum(),
            &point,
            1e-5,
        )
        .unwrap();
        for j in 0..4 {
            let analytic = 2.0 * coeffs[j] * at[j];
            let denom = analytic.abs().max(1e-3);
            prop_assert!(((grad.get(0, j) - analytic) / denom).abs() < 1e-6);
        }
    }

    #[test]
    fn split_partitions_are_disjoint_and_exhaustive(n in 10usize..200, seed in any::<u64>()) {
        // Unique covariate per row makes partition membership checkable.
        let x = Matrix::from_fn(n, 1, |i, _| i as f64);
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let ds = CausalDataset::new("p", x, t, vec![0.0; n], GroundTruth::None).unwrap();
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let (tr, va, te) = split(&ds, &spec).unwrap();
        prop_assert_eq!(tr.n() + va.n() + te.n(), n);
        let mut seen = vec![false; n];
        for part in [&tr, &va, &te] {
            for i in 0..part.n() {
                let id = part.x.get(i, 0) as usize;
                prop_assert!(!seen[id], "row {} appears twice", id);
                seen[id] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn csv_roundtrip_preserves_datasets(
        values in prop::collection::vec((finite_f64(), finite_f64(), any::<bool>(), finite_f64()), 2..20),
    ) {
        // Force both groups.
        let n = values.len();
        let x = Matrix::from_fn(n, 2, |i, j| if j == 0 { values[i].0 } else { values[i].1 });
        let mut t: Vec<u8> = values.iter().map(|v| u8::from(v.2)).collect();
        t[0] = 0;
        t[n - 1] = 1;
        let y: Vec<f64> = values.iter().map(|v| v.3).collect();
        let ds = CausalDataset::new("rt", x, t, y, GroundTruth::None).unwrap();
        let path = std::env::temp_dir().join(format!("pite-prop-{}-{n}.csv", std::process::id()));
        write_csv(&ds, &path).unwrap();
        let back = load_csv(&path, &LoadOptions::default()).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(back.x, ds.x);
        prop_assert_eq!(back.t, ds.t);
        prop_assert_eq!(back.y, ds.y);
    }

    #[test]
    fn diversity_nonpositive_and_alignment_zero_iff_coincide(
        mu0 in prop::collection::vec(prop::collection::vec(finite_f64(), 2), 2..5),
        shift in finite_f64(),
    ) {
        let k = mu0.len();
        let control = Matrix::from_rows(&mu0).unwrap();
        let treated = control.map(|v| v + shift);
        let protos = PrototypeSet::new(control, treated).unwrap();
        prop_assert!(diversity_loss(&protos) <= 0.0);
        let pairing: Vec<usize> = (0..k).collect();
        let align = align_loss(&protos, &pairing);
        if shift == 0.0 {
            prop_assert!(align <= 1e-12);
        } else {
            prop_assert!(align > 0.0);
        }
    }
}
