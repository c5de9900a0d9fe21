use plateau::{GainThreshold, ScalingModel};
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = ScalingModel> {
    (-5.0f64..0.0, 0.01f64..=1.0)
        .prop_map(|(log_p, f)| ScalingModel::new(10f64.powf(log_p).min(1.0), f).unwrap())
}

proptest! {
    #[test]
    fn hit_probability_is_monotone_and_bounded(m in model_strategy(), n in 1u64..100_000) {
        let (a, b) = (m.hit_probability(n), m.hit_probability(n + 1));
        prop_assert!(b >= a);
        prop_assert!(b <= m.f_max());
        prop_assert_eq!(m.hit_probability(n), m.f_max() * (1.0 - m.all_fail_probability(n)));
    }

    #[test]
    fn marginal_gain_telescopes(p in 1e-5f64..=1.0 - 1e-5, f in 0.01f64..=1.0, n in 0u64..=10_000) {
        let m = ScalingModel::new(p, f).unwrap();
        let diff = m.hit_probability(n + 1) - m.hit_probability(n);
        prop_assert!((m.marginal_gain(n) - diff).abs() <= 1e-12);
    }

    #[test]
    fn marginal_gain_strictly_decreases(p in 1e-3f64..0.999, f in 0.01f64..=1.0, n in 0u64..500) {
        let m = ScalingModel::new(p, f).unwrap();
        // past the normal range both gains round to the same subnormal or zero
        prop_assume!(m.marginal_gain(n + 1) >= f64::MIN_POSITIVE);
        prop_assert!(m.marginal_gain(n + 1) < m.marginal_gain(n));
    }

    #[test]
    fn threshold_monotonicity(m in model_strategy(), a in 1e-9f64..1.0, b in 1e-9f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let n_lo = m.saturation_point(GainThreshold::new(lo).unwrap()).n_star;
        let n_hi = m.saturation_point(GainThreshold::new(hi).unwrap()).n_star;
        prop_assert!(n_lo >= n_hi);
    }

    #[test]
    fn plateau_bracketing(m in model_strategy(), frac in 1e-6f64..1.0) {
        let epsilon = m.f_max() * m.p_x() * frac;
        prop_assume!(epsilon < m.f_max() * m.p_x());
        let sp = m.saturation_point(GainThreshold::new(epsilon).unwrap());
        prop_assume!(sp.n_star <= 1_000_000);
        prop_assert!(!sp.degenerate);
        prop_assert!(m.marginal_gain(sp.n_star) < epsilon);
        prop_assert!(m.marginal_gain(sp.n_star - 1) >= epsilon);
    }

    #[test]
    fn degenerate_iff_threshold_exceeds_first_gain(m in model_strategy(), scale in 1.0f64..100.0) {
        let sp = m.saturation_point(GainThreshold::new(m.f_max() * m.p_x() * scale).unwrap());
        prop_assert_eq!(sp.n_star, 1);
        prop_assert!(sp.degenerate);
    }
}

#[test]
fn geometric_normalization() {
    for &p in &[1e-5, 1e-3, 0.05, 0.3, 0.5, 0.77, 1.0 - 1e-5] {
        let m = ScalingModel::new(p, 1.0).unwrap();
        let mut partial = 0.0;
        for n in 1..=10_000u64 {
            partial += m.first_success_pmf(n);
            if n % 997 == 0 || n == 10_000 {
                let closed = 1.0 - m.all_fail_probability(n);
                assert!(
                    (partial - closed).abs() <= 1e-12,
                    "p={p} n={n}: {partial} vs {closed}"
                );
            }
        }
    }
}

/// Scan oracle for N*: multiply the gain down until it drops under epsilon.
#[test]
fn saturation_matches_scan_for_moderate_budgets() {
    for &p in &[0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.99] {
        for &f in &[0.3, 0.8, 1.0] {
            for &frac in &[0.9, 0.5, 0.1, 1e-2, 1e-3, 1e-4] {
                let eps = f * p * frac;
                let m = ScalingModel::new(p, f).unwrap();
                let mut gain = f * p;
                let mut n = 0;
                while gain >= eps {
                    gain *= 1.0 - p;
                    n += 1;
                }
                let sp = m.saturation_point(GainThreshold::new(eps).unwrap());
                assert_eq!(sp.n_star, n.max(1), "p={p} f={f} eps={eps}");
            }
        }
    }
}
