use motionsep::separation::{interpolate_global, local_vector};
use motionsep::{
    displacement_field, estimate_corners, estimate_global, estimate_local, separate,
    trimmed_mean_middle60, FlowField, GlobalMotionModel,
};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = GlobalMotionModel> {
    (-0.2f64..0.2, -20.0f64..20.0, -0.2f64..0.2, -20.0f64..20.0)
        .prop_map(|(a, b, c, d)| GlobalMotionModel::new(1.0 + a, b, 1.0 + c, d).unwrap())
}

fn field(max_side: usize, amp: f64) -> impl Strategy<Value = FlowField> {
    (2usize..max_side, 2usize..max_side).prop_flat_map(move |(w, h)| {
        prop::collection::vec((-amp..amp, -amp..amp), w * h).prop_map(move |v| {
            FlowField::new(w, h, v.into_iter().map(|(a, b)| [a, b]).collect()).unwrap()
        })
    })
}

/// Sorts, drops floor(n/5) per tail, averages: written independently of the crate.
fn reference_trimmed_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len() / 5;
    let kept = &v[k..v.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

proptest! {
    #[test]
    fn trimmed_mean_matches_reference(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let got = trimmed_mean_middle60(&v).unwrap();
        prop_assert!((got - reference_trimmed_mean(&v)).abs() <= 1e-9);
    }

    #[test]
    fn camera_fields_are_recovered(m in model(), w in 2usize..128, h in 2usize..128) {
        let g = displacement_field(&m, w, h).unwrap();
        prop_assert!(estimate_global(&g).unwrap().max_abs_diff(&g) <= 1e-9);
    }

    #[test]
    fn corners_ignore_contained_outliers(
        m in model(),
        w in 5usize..80,
        h in 5usize..80,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let clean = displacement_field(&m, w, h).unwrap();
        let before = estimate_corners(&clean).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut data = clean.data().to_vec();
        // corrupt up to floor(n/5) entries per tail on every edge line; columns
        // feed dx and rows feed dy, so each line only touches its own component
        let mut hit = |idx: Vec<usize>, comp: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let k = idx.len() / 5;
            let lo = rng.random_range(0..=k);
            let hi = rng.random_range(0..=k);
            let mut order = idx;
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            for (j, &p) in order.iter().take(lo + hi).enumerate() {
                let s = if j < lo { -100.0 } else { 100.0 };
                data[p][comp] = s;
            }
        };
        hit((0..h).map(|y| y * w).collect(), 0, &mut rng);
        hit((0..h).map(|y| y * w + w - 1).collect(), 0, &mut rng);
        hit((0..w).collect(), 1, &mut rng);
        hit((0..w).map(|x| (h - 1) * w + x).collect(), 1, &mut rng);
        let dirty = FlowField::new(w, h, data).unwrap();
        let after = estimate_corners(&dirty).unwrap();
        for (a, b) in before.corners().iter().zip(after.corners()) {
            prop_assert!((a[0] - b[0]).abs() <= 1e-9 && (a[1] - b[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn local_is_zero_or_residual(mixed in field(24, 5.0), theta in 0.0f64..3.0) {
        let r = separate(&mixed, theta).unwrap();
        for ((m, g), l) in mixed.data().iter().zip(r.global.data()).zip(r.local.data()) {
            let residual = [m[0] - g[0], m[1] - g[1]];
            prop_assert!(*l == [0.0, 0.0] || *l == residual);
            if *l != [0.0, 0.0] {
                // g + (m - g) can differ from m in the last place
                for k in 0..2 {
                    prop_assert!((g[k] + l[k] - m[k]).abs() <= 4.0 * f64::EPSILON * m[k].abs().max(g[k].abs()));
                }
            }
        }
    }

    #[test]
    fn raising_theta_never_adds_local_pixels(mixed in field(24, 5.0), t1 in 0.0f64..3.0, dt in 0.0f64..3.0) {
        let g = estimate_global(&mixed).unwrap();
        let count = |t: f64| estimate_local(&mixed, &g, t).unwrap().data().iter().filter(|v| **v != [0.0, 0.0]).count();
        prop_assert!(count(t1 + dt) <= count(t1));
    }

    #[test]
    fn interpolation_hits_corners(x0 in -9.0f64..9.0, x1 in -9.0f64..9.0, y0 in -9.0f64..9.0, y1 in -9.0f64..9.0, w in 2usize..40, h in 2usize..40) {
        let c = motionsep::CornerEstimates { x_left: x0, x_right: x1, y_top: y0, y_bottom: y1 };
        let f = interpolate_global(&c, w, h);
        prop_assert_eq!(f.get(0, 0), [x0, y0]);
        prop_assert_eq!(f.get(w - 1, h - 1), [x1, y1]);
    }
}

#[test]
fn threshold_rule_branches() {
    assert_eq!(local_vector([0.5, 0.0], [0.0, 0.0], 1.0), [0.0, 0.0]);
    assert_eq!(local_vector([3.0, 0.0], [0.0, 0.0], 1.0), [3.0, 0.0]);
    assert_eq!(local_vector([3.0, 0.0], [0.0, 2.5], 1.0), [0.0, 0.0]);
    assert_eq!(local_vector([3.0, 0.0], [0.0, 2.5], 0.0), [3.0, -2.5]);
}
