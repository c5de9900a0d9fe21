use std::collections::BTreeSet;

use plateau::estimation::{
    calibrate, calibrate_with, estimate, predict_saturation, split, CalibrationSample, RatioGrid,
    SequentialEstimator, SplitSpec,
};
use plateau::simulator::{simulate, SimConfig};
use plateau::Execution;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mean_parallel_estimate(p: f64, problems: usize, seed: u64) -> f64 {
    let set = simulate(&SimConfig::new(
        plateau::Strategy::Parallel,
        p,
        32,
        problems,
        seed,
    ))
    .unwrap()
    .to_record_set();
    let problems = set.problems();
    let total: f64 = problems
        .iter()
        .map(|pl| {
            estimate(pl.records, 32, SequentialEstimator::default())
                .unwrap()
                .p_hat
        })
        .sum();
    total / problems.len() as f64
}

fn rms_error(p: f64, problems: usize) -> f64 {
    let sq: f64 = (0..16)
        .map(|seed| (mean_parallel_estimate(p, problems, 1_000 + seed) - p).powi(2))
        .sum();
    (sq / 16.0).sqrt()
}

#[test]
fn parallel_estimator_error_shrinks_with_problem_count() {
    let p = 0.3;
    let errors: Vec<f64> = [100, 1_000, 10_000]
        .iter()
        .map(|&n| rms_error(p, n))
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] <= 0.01, "{errors:?}");
    // standard error of the mean scales like 1/sqrt(problems * units)
    let expected = (p * (1.0 - p) / (10_000.0 * 32.0)).sqrt();
    assert!(errors[2] < 3.0 * expected, "{} vs {expected}", errors[2]);
}

#[test]
fn calibration_recovers_known_ratio() {
    let target = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples: Vec<CalibrationSample> = (0..500)
        .map(|_| {
            let p_hat = rng.random_range(0.02..0.9);
            let observed = predict_saturation(p_hat, target).unwrap().n_star as u32;
            CalibrationSample { p_hat, observed }
        })
        .collect();
    let grid = RatioGrid::default();
    let fit = calibrate(&samples, grid).unwrap();
    // the zero-loss interval around the target can be narrower than the refinement spacing
    assert!(fit.loss <= 0.05, "loss {}", fit.loss);
    let distance = (fit.ratio / target).ln().abs() / grid.step_factor().ln();
    assert!(
        distance <= 1.0,
        "ratio {} is {distance} steps away",
        fit.ratio
    );

    let seq = calibrate_with(&samples, grid, Execution::Sequential).unwrap();
    let par = calibrate_with(&samples, grid, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq, fit);
}

#[test]
fn calibrated_loss_never_exceeds_any_grid_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<CalibrationSample> = (0..200)
        .map(|_| CalibrationSample {
            p_hat: rng.random_range(0.01..1.0),
            observed: rng.random_range(1..=32),
        })
        .collect();
    let grid = RatioGrid::default();
    let fit = calibrate(&samples, grid).unwrap();
    for r in grid.values() {
        let total: u64 = samples
            .iter()
            .map(|s| {
                predict_saturation(s.p_hat, r)
                    .unwrap()
                    .n_star
                    .abs_diff(s.observed as u64)
            })
            .sum();
        assert!(fit.loss <= total as f64 / samples.len() as f64 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_ids(size in 2usize..=10_000, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let ids: Vec<String> = (0..size).map(|i| format!("q{i:05}")).collect();
        let spec = SplitSpec::new(frac, seed).unwrap();
        let (validation, test) = split(&ids, spec).unwrap();

        prop_assert!(!validation.is_empty() && !test.is_empty());
        prop_assert_eq!(validation.len() + test.len(), size);
        let expected = ((frac * size as f64).round() as usize).clamp(1, size - 1);
        prop_assert_eq!(validation.len(), expected);

        let v: BTreeSet<_> = validation.iter().collect();
        let t: BTreeSet<_> = test.iter().collect();
        prop_assert!(v.is_disjoint(&t));
        prop_assert_eq!(v.union(&t).count(), size);

        prop_assert_eq!(split(&ids, spec).unwrap(), (validation, test));
    }

    #[test]
    fn split_ignores_input_order(ids in prop::collection::btree_set("[a-z]{1,6}", 2..200), seed in any::<u64>()) {
        let sorted: Vec<String> = ids.into_iter().collect();
        let mut reversed = sorted.clone();
        reversed.reverse();
        let spec = SplitSpec::new(0.8, seed).unwrap();
        prop_assert_eq!(split(&sorted, spec).unwrap(), split(&reversed, spec).unwrap());
    }
}

#[test]
fn split_rejects_duplicates_and_tiny_inputs() {
    let spec = SplitSpec::new(0.5, 0).unwrap();
    assert!(split(&["a".into(), "a".into()], spec).is_err());
    assert!(split(&["a".into()], spec).is_err());
    assert!(SplitSpec::new(1.0, 0).is_err());
    assert!(SplitSpec::new(0.0, 0).is_err());
}
