use proptest::prelude::*;
use synthforge::metrics::{compare_cohorts, first_order_features, ks_statistic};
use synthforge::tensor::Tensor;

fn pixels() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..80)
}

proptest! {
    #[test]
    fn features_ignore_pixel_order(mut v in pixels(), seed in any::<u64>()) {
        let a = first_order_features(&Tensor::from_vec(v.clone())).unwrap();
        // deterministic Fisher–Yates from the seed
        let mut s = seed;
        for i in (1..v.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            v.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = first_order_features(&Tensor::from_vec(v)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn feature_invariants(v in pixels()) {
        let f = first_order_features(&Tensor::from_vec(v)).unwrap();
        prop_assert!(f.variance >= 0.0);
        prop_assert!(f.uniformity > 0.0 && f.uniformity <= 1.0 + 1e-12);
        prop_assert!(f.entropy_bits >= 0.0 && f.entropy_bits <= 6.0 + 1e-12);
        prop_assert!(f.p10 <= f.median && f.median <= f.p90);
    }

    #[test]
    fn symmetric_images_have_zero_skew(half in prop::collection::vec(-2.0f64..2.0, 1..40), c in -1.0f64..1.0) {
        let v: Vec<f64> = half.iter().flat_map(|d| [c + d, c - d]).collect();
        let f = first_order_features(&Tensor::from_vec(v)).unwrap();
        prop_assert!(f.skewness.abs() <= 1e-9, "{}", f.skewness);
    }

    #[test]
    fn ks_symmetric_and_monotone_invariant(a in pixels(), b in pixels()) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        let t = |v: &[f64]| v.iter().map(|x| x.exp() * 2.0 + 1.0).collect::<Vec<_>>();
        prop_assert_eq!(d, ks_statistic(&t(&a), &t(&b)).unwrap());
    }
}

#[test]
fn intensity_shift_separates_means() {
    let real: Vec<Tensor> = (0..20).map(|i| Tensor::full(&[4, 4], 0.1 + 0.01 * i as f64)).collect();
    let shifted: Vec<Tensor> = real.iter().map(|t| t.map(|v| v + 0.5)).collect();
    let r = compare_cohorts(&real, &shifted).unwrap();
    assert_eq!(r.row("mean").unwrap().ks_distance, 1.0);
    assert!(r.row("mean").unwrap().standardized_diff > 0.0);
}
