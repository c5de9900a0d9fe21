//! End-to-end analyses over a parsed log: per-problem prediction,
//! calibration, and the split/calibrate/predict/correlate verification run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    self, calibrate_with, observed_saturation, predict_saturation, Calibration, CalibrationSample,
    Estimator, ObservedSaturation, ProblemEstimate, RatioGrid, SequentialEstimator, SplitSpec,
};
use crate::exec::Execution;
use crate::ingest::{ProblemLog, RecordSet, Strategy};
use crate::metrics::{self, CorrelationReport, CurvePoint, HistogramBin, SaturationPair};
use crate::model::{GainThreshold, SaturationPoint, ScalingModel};

/// How the plateau threshold is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlateauRule {
    /// Calibrated `epsilon / f_max`.
    Ratio(f64),
    Explicit {
        epsilon: f64,
        f_max: f64,
    },
}

impl PlateauRule {
    pub fn saturation(&self, p_hat: f64) -> Result<SaturationPoint> {
        match *self {
            PlateauRule::Ratio(r) => predict_saturation(p_hat, r),
            PlateauRule::Explicit { epsilon, f_max } => {
                Ok(ScalingModel::new(p_hat, f_max)?.saturation_point(GainThreshold::new(epsilon)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub problem_id: String,
    pub strategy: Strategy,
    pub p_hat: f64,
    pub estimator: Estimator,
    pub n_star: u64,
    pub degenerate: bool,
}

/// Chooses the strategy to analyse: the requested one, or the only one present.
pub fn select_strategy(set: &RecordSet, requested: Option<Strategy>) -> Result<Strategy> {
    let present = set.strategies();
    match requested {
        Some(s) if present.contains(&s) => Ok(s),
        Some(s) => Err(Error::InvalidLog(format!("log has no {s} records"))),
        None => match present.as_slice() {
            [] => Err(Error::Empty { what: "log" }),
            [only] => Ok(*only),
            _ => Err(Error::param(
                "strategy",
                "log holds both strategies; select one with --strategy",
            )),
        },
    }
}

fn estimate_problem(
    problem: &ProblemLog<'_>,
    estimator: SequentialEstimator,
) -> Result<ProblemEstimate> {
    estimation::estimate(problem.records, problem.units() as u32, estimator)
}

/// Estimates `p_hat` and `N*` for every problem group in the log.
pub fn predict_log(
    set: &RecordSet,
    rule: PlateauRule,
    estimator: SequentialEstimator,
) -> Result<Vec<PredictionRow>> {
    set.problems()
        .iter()
        .map(|problem| {
            let est = estimate_problem(problem, estimator)?;
            let sp = rule.saturation(est.p_hat)?;
            Ok(PredictionRow {
                problem_id: est.problem_id,
                strategy: problem.strategy,
                p_hat: est.p_hat,
                estimator: est.estimator,
                n_star: sp.n_star,
                degenerate: sp.degenerate,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    pub estimator: SequentialEstimator,
    pub grid: RatioGrid,
    /// Keep never-solved problems in calibration and correlation.
    pub include_unsolved: bool,
    pub exec: Execution,
}

struct ProblemSummary<'a> {
    log: ProblemLog<'a>,
    estimate: ProblemEstimate,
    observed: ObservedSaturation,
}

fn summarize<'a>(
    problems: &[ProblemLog<'a>],
    estimator: SequentialEstimator,
) -> Result<Vec<ProblemSummary<'a>>> {
    problems
        .iter()
        .map(|p| {
            Ok(ProblemSummary {
                log: *p,
                estimate: estimate_problem(p, estimator)?,
                observed: observed_saturation(p.records, p.units() as u32)?,
            })
        })
        .collect()
}

fn calibrate_summaries(
    summaries: &[&ProblemSummary<'_>],
    options: &AnalysisOptions,
) -> Result<Calibration> {
    let samples: Vec<CalibrationSample> = summaries
        .iter()
        .filter(|s| options.include_unsolved || !s.observed.unsolved)
        .map(|s| CalibrationSample {
            p_hat: s.estimate.p_hat,
            observed: s.observed.n,
        })
        .collect();
    calibrate_with(&samples, options.grid, options.exec)
}

/// Calibrates the ratio on every problem of one strategy.
pub fn calibrate_log(
    set: &RecordSet,
    strategy: Strategy,
    options: &AnalysisOptions,
) -> Result<Calibration> {
    let problems = set.problems_for(strategy);
    let summaries = summarize(&problems, options.estimator)?;
    calibrate_summaries(&summaries.iter().collect::<Vec<_>>(), options)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPrediction {
    pub problem_id: String,
    pub p_hat: f64,
    pub estimator: Estimator,
    pub n_star: u64,
    pub degenerate: bool,
    pub observed: u32,
    pub unsolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub strategy: Strategy,
    pub sequential_estimator: SequentialEstimator,
    pub validation_fraction: f64,
    pub problems: usize,
    pub validation_problems: usize,
    pub test_problems: usize,
    pub calibration: Calibration,
    pub correlation: CorrelationReport,
    pub hit_curve: Vec<CurvePoint>,
    pub accuracy_curve: Vec<CurvePoint>,
    /// Observed saturation budgets over all problems.
    pub saturation_histogram: Vec<HistogramBin>,
    pub test_predictions: Vec<TestPrediction>,
}

/// Split, calibrate on the validation part, predict on the test part and
/// correlate predicted with observed saturation; also computes the Hit@N and
/// accuracy curves and the saturation histogram of the whole log.
pub fn evaluate_log(
    set: &RecordSet,
    strategy: Strategy,
    split: SplitSpec,
    options: &AnalysisOptions,
) -> Result<EvaluationReport> {
    let problems = set.problems_for(strategy);
    let summaries = summarize(&problems, options.estimator)?;
    let ids: Vec<String> = summaries
        .iter()
        .map(|s| s.log.problem_id.to_string())
        .collect();
    let (validation_ids, test_ids) = estimation::split(&ids, split)?;

    // both id lists and summaries are sorted by problem id
    let pick = |wanted: &[String]| -> Vec<&ProblemSummary<'_>> {
        let mut out = Vec::with_capacity(wanted.len());
        let mut it = summaries.iter();
        for id in wanted {
            out.push(
                it.find(|s| s.log.problem_id == id)
                    .expect("split ids come from summaries"),
            );
        }
        out
    };
    let validation = pick(&validation_ids);
    let test = pick(&test_ids);

    let calibration = calibrate_summaries(&validation, options)?;
    let rule = PlateauRule::Ratio(calibration.ratio);
    let test_predictions = test
        .iter()
        .map(|s| {
            let sp = rule.saturation(s.estimate.p_hat)?;
            Ok(TestPrediction {
                problem_id: s.estimate.problem_id.clone(),
                p_hat: s.estimate.p_hat,
                estimator: s.estimate.estimator,
                n_star: sp.n_star,
                degenerate: sp.degenerate,
                observed: s.observed.n,
                unsolved: s.observed.unsolved,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<SaturationPair> = test_predictions
        .iter()
        .map(|t| SaturationPair {
            predicted: t.n_star as f64,
            observed: t.observed as f64,
            unsolved: t.unsolved,
        })
        .collect();
    let correlation = metrics::pearson_pairs(&pairs, options.include_unsolved)?;

    let n_max = problems.iter().map(|p| p.units()).min().unwrap_or(0);
    let hit_curve = metrics::hit_curve(&problems, n_max)?.points;
    let accuracy_curve = metrics::accuracy_curve(&problems, n_max)?.points;
    let longest = problems.iter().map(|p| p.units()).max().unwrap_or(0) as u32;
    let observed: Vec<u32> = summaries.iter().map(|s| s.observed.n).collect();
    let saturation_histogram = metrics::saturation_histogram(&observed, longest)?;

    Ok(EvaluationReport {
        strategy,
        sequential_estimator: options.estimator,
        validation_fraction: split.validation_fraction(),
        problems: summaries.len(),
        validation_problems: validation.len(),
        test_problems: test.len(),
        calibration,
        correlation,
        hit_curve,
        accuracy_curve,
        saturation_histogram,
        test_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{simulate, ProbabilitySource, SimConfig};

    fn sequential_log(n: usize, seed: u64) -> RecordSet {
        let mut config = SimConfig::new(Strategy::Sequential, 0.2, 32, n, seed);
        config.p = ProbabilitySource::Uniform {
            low: 0.05,
            high: 0.5,
        };
        simulate(&config).unwrap().to_record_set()
    }

    #[test]
    fn predict_rows_cover_every_problem() {
        let set = sequential_log(20, 1);
        let rows = predict_log(
            &set,
            PlateauRule::Ratio(0.01),
            SequentialEstimator::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 20);
        let explicit = predict_log(
            &set,
            PlateauRule::Explicit {
                epsilon: 0.01,
                f_max: 1.0,
            },
            SequentialEstimator::default(),
        )
        .unwrap();
        assert_eq!(rows, explicit);
    }

    #[test]
    fn strategy_selection() {
        let set = sequential_log(5, 2);
        assert_eq!(select_strategy(&set, None).unwrap(), Strategy::Sequential);
        assert!(select_strategy(&set, Some(Strategy::Parallel)).is_err());

        let mut both = set.clone().into_records();
        both.extend(
            simulate(&SimConfig::new(Strategy::Parallel, 0.5, 4, 3, 0))
                .unwrap()
                .records(),
        );
        let both = RecordSet::new(both).unwrap();
        assert!(matches!(
            select_strategy(&both, None),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let set = sequential_log(300, 3);
        let split = SplitSpec::new(0.8, 5).unwrap();
        let a = evaluate_log(
            &set,
            Strategy::Sequential,
            split,
            &AnalysisOptions::default(),
        )
        .unwrap();
        let b = evaluate_log(
            &set,
            Strategy::Sequential,
            split,
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.validation_problems, 240);
        assert_eq!(a.test_problems, 60);
        assert_eq!(a.hit_curve.len(), 32);
        assert_eq!(
            a.saturation_histogram.iter().map(|b| b.count).sum::<u64>(),
            300
        );
    }

    #[test]
    fn evaluation_surfaces_zero_variance() {
        // every problem solved in round one: observed saturation is constant
        let set = simulate(&SimConfig::new(Strategy::Sequential, 1.0, 8, 50, 0))
            .unwrap()
            .to_record_set();
        let err = evaluate_log(
            &set,
            Strategy::Sequential,
            SplitSpec::new(0.8, 0).unwrap(),
            &AnalysisOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroVariance { .. }));
        assert_eq!(err.exit_code(), 3);
    }
}
