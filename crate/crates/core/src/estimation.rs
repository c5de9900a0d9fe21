//! Per-problem parameter estimation, validation split, ratio calibration and
//! aggregate curve fitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{GenerationRecord, Strategy};
use crate::metrics::ScalingCurve;
use crate::model::{survival, GainThreshold, SaturationPoint, ScalingModel};

/// Probability assigned to problems never solved within the observed units.
pub const UNSOLVED_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// correct / n_used over parallel samples
    SampleFraction,
    /// k / n_used where k is the first solving round
    FirstSolveRatio,
    /// 1 / k, the geometric maximum-likelihood estimate
    InverseFirstSolve,
    UnsolvedFloor,
}

/// Estimator applied to sequential logs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SequentialEstimator {
    #[default]
    FirstSolveRatio,
    InverseFirstSolve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemEstimate {
    pub problem_id: String,
    pub p_hat: f64,
    pub estimator: Estimator,
    pub n_used: u32,
}

impl ProblemEstimate {
    fn floored(problem_id: &str, n_used: u32) -> Self {
        Self {
            problem_id: problem_id.to_string(),
            p_hat: UNSOLVED_FLOOR,
            estimator: Estimator::UnsolvedFloor,
            n_used,
        }
    }
}

/// Checks that `records` are the complete units `1..=n_used` of one problem
/// under `strategy` and returns them ordered by unit.
fn complete_units(
    records: &[GenerationRecord],
    n_used: u32,
    strategy: Option<Strategy>,
) -> Result<Vec<&GenerationRecord>> {
    if n_used == 0 {
        return Err(Error::param("n_used", "must be >= 1"));
    }
    let first = records.first().ok_or(Error::Empty {
        what: "problem records",
    })?;
    if let Some(other) = records.iter().find(|r| r.problem_id != first.problem_id) {
        return Err(Error::InvalidLog(format!(
            "records mix problems `{}` and `{}`",
            first.problem_id, other.problem_id
        )));
    }
    if let Some(expected) = strategy {
        if let Some(other) = records.iter().find(|r| r.strategy != expected) {
            return Err(Error::InvalidLog(format!(
                "problem `{}`: expected {expected} records, unit {} is {}",
                first.problem_id, other.unit, other.strategy
            )));
        }
    } else if let Some(other) = records.iter().find(|r| r.strategy != first.strategy) {
        return Err(Error::InvalidLog(format!(
            "problem `{}`: mixed strategies at unit {}",
            first.problem_id, other.unit
        )));
    }
    if records.len() != n_used as usize {
        return Err(Error::InvalidLog(format!(
            "problem `{}`: expected {n_used} records, got {}",
            first.problem_id,
            records.len()
        )));
    }
    let mut ordered: Vec<&GenerationRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.unit);
    for (expected, r) in (1u32..).zip(&ordered) {
        if r.unit != expected {
            return Err(Error::InvalidLog(format!(
                "problem `{}`: unit {expected} missing",
                first.problem_id
            )));
        }
    }
    Ok(ordered)
}

/// `p_hat = correct / n_used`; zero-correct problems get [`UNSOLVED_FLOOR`].
pub fn estimate_parallel(records: &[GenerationRecord], n_used: u32) -> Result<ProblemEstimate> {
    let units = complete_units(records, n_used, Some(Strategy::Parallel))?;
    let problem_id = &units[0].problem_id;
    let correct = units.iter().filter(|r| r.correct).count();
    if correct == 0 {
        return Ok(ProblemEstimate::floored(problem_id, n_used));
    }
    Ok(ProblemEstimate {
        problem_id: problem_id.clone(),
        p_hat: correct as f64 / n_used as f64,
        estimator: Estimator::SampleFraction,
        n_used,
    })
}

/// Estimate from the first solving round `k`.
///
/// The default estimator is `k / n_used`; [`SequentialEstimator::InverseFirstSolve`]
/// gives `1 / k`. Unsolved problems get [`UNSOLVED_FLOOR`]. The sequence must
/// be absorbing: no incorrect round after the first correct one.
pub fn estimate_sequential(
    records: &[GenerationRecord],
    n_used: u32,
    estimator: SequentialEstimator,
) -> Result<ProblemEstimate> {
    let units = complete_units(records, n_used, Some(Strategy::Sequential))?;
    let problem_id = &units[0].problem_id;
    let Some(first) = units.iter().position(|r| r.correct) else {
        return Ok(ProblemEstimate::floored(problem_id, n_used));
    };
    let violations: Vec<String> = units[first..]
        .iter()
        .filter(|r| !r.correct)
        .map(|r| r.unit.to_string())
        .collect();
    if !violations.is_empty() {
        return Err(Error::InvalidLog(format!(
            "problem `{problem_id}`: not absorbing, first solved at round {} but incorrect at round(s) {}",
            first + 1,
            violations.join(", ")
        )));
    }
    let k = (first + 1) as f64;
    let (p_hat, tag) = match estimator {
        SequentialEstimator::FirstSolveRatio => (k / n_used as f64, Estimator::FirstSolveRatio),
        SequentialEstimator::InverseFirstSolve => (1.0 / k, Estimator::InverseFirstSolve),
    };
    Ok(ProblemEstimate {
        problem_id: problem_id.clone(),
        p_hat,
        estimator: tag,
        n_used,
    })
}

/// Dispatches on the records' strategy.
pub fn estimate(
    records: &[GenerationRecord],
    n_used: u32,
    sequential: SequentialEstimator,
) -> Result<ProblemEstimate> {
    match records.first().map(|r| r.strategy) {
        Some(Strategy::Parallel) => estimate_parallel(records, n_used),
        Some(Strategy::Sequential) => estimate_sequential(records, n_used, sequential),
        None => Err(Error::Empty {
            what: "problem records",
        }),
    }
}

/// Budget at which a problem is first solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedSaturation {
    pub n: u32,
    /// Never solved; `n` is then the number of units observed.
    pub unsolved: bool,
}

pub fn observed_saturation(
    records: &[GenerationRecord],
    n_used: u32,
) -> Result<ObservedSaturation> {
    let units = complete_units(records, n_used, None)?;
    Ok(match units.iter().find(|r| r.correct) {
        Some(r) => ObservedSaturation {
            n: r.unit,
            unsolved: false,
        },
        None => ObservedSaturation {
            n: n_used,
            unsolved: true,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    validation_fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(validation_fraction: f64, seed: u64) -> Result<Self> {
        if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
            return Err(Error::param(
                "validation fraction",
                format!("must lie in (0, 1), got {validation_fraction}"),
            ));
        }
        Ok(Self {
            validation_fraction,
            seed,
        })
    }

    pub fn validation_fraction(&self) -> f64 {
        self.validation_fraction
    }
}

/// Seeded random partition into `(validation, test)`; both halves are
/// returned sorted. The result depends only on the id set and the seed.
pub fn split(problem_ids: &[String], spec: SplitSpec) -> Result<(Vec<String>, Vec<String>)> {
    let mut ids = problem_ids.to_vec();
    ids.sort();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before {
        return Err(Error::InvalidLog("duplicate problem ids in split".into()));
    }
    let n = ids.len();
    if n < 2 {
        return Err(Error::InvalidLog(format!(
            "need at least 2 problems to split, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);
    let take = ((spec.validation_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut test = ids.split_off(take);
    ids.sort();
    test.sort();
    Ok((ids, test))
}

/// Log-spaced search grid for the `epsilon / f_max` ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Points in the refinement pass between the optimum's grid neighbours.
    pub refine_points: usize,
}

impl Default for RatioGrid {
    fn default() -> Self {
        Self {
            min: 1e-6,
            max: 1.0,
            points: 200,
            refine_points: 41,
        }
    }
}

impl RatioGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.min > 0.0 && self.max.is_finite() && self.max > self.min)
        {
            return Err(Error::param(
                "ratio grid",
                format!("need 0 < min < max, got [{}, {}]", self.min, self.max),
            ));
        }
        if self.points < 2 {
            return Err(Error::param("ratio grid", "need at least 2 points"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        log_space(self.min, self.max, self.points)
    }

    /// Multiplicative distance between neighbouring grid points.
    pub fn step_factor(&self) -> f64 {
        (self.max / self.min).powf(1.0 / (self.points - 1) as f64)
    }
}

fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect();
    out[0] = lo;
    out[points - 1] = hi;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub p_hat: f64,
    pub observed: u32,
}

/// Fitted `epsilon / f_max` and its validation loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ratio: f64,
    /// Mean absolute error between predicted and observed budgets.
    pub loss: f64,
    pub grid: RatioGrid,
}

/// Plateau budget for an estimated probability under a calibrated ratio.
///
/// `N*` only depends on `epsilon / (f_max * p)`, so the ratio acts as the
/// threshold of a model with `f_max = 1`.
pub fn predict_saturation(p_hat: f64, ratio: f64) -> Result<SaturationPoint> {
    let model = ScalingModel::new(p_hat, 1.0)?;
    Ok(model.saturation_point(GainThreshold::new(ratio)?))
}

fn total_abs_error(samples: &[(ScalingModel, u32)], ratio: f64) -> u64 {
    let threshold = GainThreshold::new(ratio).expect("grid ratios are positive");
    samples
        .iter()
        .map(|(m, obs)| m.saturation_point(threshold).n_star.abs_diff(*obs as u64))
        .fold(0u64, |acc, e| acc.saturating_add(e))
}

/// Index of the smallest loss, preferring the later (larger-ratio) entry on ties.
fn argmin_prefer_last(losses: &[u64]) -> usize {
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l <= losses[best] {
            best = i;
        }
    }
    best
}

pub fn calibrate(samples: &[CalibrationSample], grid: RatioGrid) -> Result<Calibration> {
    calibrate_with(samples, grid, Execution::default())
}

/// Grid search for the ratio minimizing mean absolute error between
/// predicted `N*` and observed budgets, followed by one refinement pass
/// between the neighbours of the best grid point.
pub fn calibrate_with(
    samples: &[CalibrationSample],
    grid: RatioGrid,
    exec: Execution,
) -> Result<Calibration> {
    grid.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty {
            what: "validation set",
        });
    }
    let models = samples
        .iter()
        .map(|s| Ok((ScalingModel::new(s.p_hat, 1.0)?, s.observed)))
        .collect::<Result<Vec<_>>>()?;

    let coarse = grid.values();
    let losses = exec.map_slice(&coarse, |&r| total_abs_error(&models, r));
    let best = argmin_prefer_last(&losses);
    let (mut ratio, mut total) = (coarse[best], losses[best]);

    if grid.refine_points >= 2 {
        let lo = coarse[best.saturating_sub(1)];
        let hi = coarse[(best + 1).min(coarse.len() - 1)];
        let fine = log_space(lo, hi, grid.refine_points);
        let fine_losses = exec.map_slice(&fine, |&r| total_abs_error(&models, r));
        for (&r, &l) in fine.iter().zip(&fine_losses) {
            if l < total || (l == total && r > ratio) {
                ratio = r;
                total = l;
            }
        }
    }

    Ok(Calibration {
        ratio,
        loss: total as f64 / samples.len() as f64,
        grid,
    })
}

const CURVE_GRID: usize = 1000;

/// Least-squares fit of `F(N) = f_max (1 - (1 - p)^N)` to a curve.
///
/// For a fixed `p` the optimal `f_max` is linear least squares, so the
/// search is one-dimensional: a grid over `p` followed by golden-section
/// refinement around the best grid cell.
pub fn fit_aggregate_curve(curve: &ScalingCurve) -> Result<ScalingModel> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::param(
            "curve",
            format!("need at least 3 points to fit, got {}", pts.len()),
        ));
    }
    if pts.windows(2).any(|w| w[1].value < w[0].value) {
        return Err(Error::param("curve", "must be nondecreasing to fit"));
    }
    if pts.iter().all(|pt| pt.value == 0.0) {
        return Err(Error::Degenerate("curve is identically zero".into()));
    }

    let profile = |p: f64| -> (f64, f64) {
        let basis: Vec<f64> = pts
            .iter()
            .map(|pt| 1.0 - survival(p, pt.n as u64))
            .collect();
        let num: f64 = basis.iter().zip(pts).map(|(b, pt)| b * pt.value).sum();
        let den: f64 = basis.iter().map(|b| b * b).sum();
        let f = (num / den).clamp(f64::MIN_POSITIVE, 1.0);
        let sse = basis
            .iter()
            .zip(pts)
            .map(|(b, pt)| (pt.value - f * b).powi(2))
            .sum();
        (f, sse)
    };

    let candidates: Vec<f64> = (1..=CURVE_GRID)
        .map(|j| j as f64 / CURVE_GRID as f64)
        .collect();
    let mut best = 0;
    let mut best_sse = f64::INFINITY;
    for (j, &p) in candidates.iter().enumerate() {
        let (_, sse) = profile(p);
        if sse < best_sse {
            best = j;
            best_sse = sse;
        }
    }
    let mut p_best = candidates[best];
    let (mut f_best, _) = profile(p_best);

    let lo = if best == 0 {
        f64::EPSILON
    } else {
        candidates[best - 1]
    };
    let hi = candidates[(best + 1).min(CURVE_GRID - 1)];
    let p_golden = golden_section(lo, hi, |p| profile(p).1);
    let (f_golden, sse_golden) = profile(p_golden);
    if sse_golden < best_sse {
        p_best = p_golden;
        f_best = f_golden;
    }
    ScalingModel::new(p_best, f_best)
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
