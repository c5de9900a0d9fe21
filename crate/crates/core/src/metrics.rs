//! Evaluation metrics over generation logs.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::ingest::{GenerationRecord, ProblemLog, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Hit,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u32,
    pub value: f64,
}

/// Metric value as a function of the scaling budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub metric: Metric,
    pub points: Vec<CurvePoint>,
}

impl ScalingCurve {
    /// Budgets must be strictly increasing and positive, values in `[0, 1]`;
    /// hit curves must also be nondecreasing.
    pub fn new(metric: Metric, points: Vec<CurvePoint>) -> Result<Self> {
        for (i, pt) in points.iter().enumerate() {
            if pt.n == 0 {
                return Err(Error::param("curve", "budgets start at 1"));
            }
            if !(0.0..=1.0).contains(&pt.value) {
                return Err(Error::param(
                    "curve",
                    format!("value {} at n={} outside [0, 1]", pt.value, pt.n),
                ));
            }
            if i > 0 {
                let prev = points[i - 1];
                if pt.n <= prev.n {
                    return Err(Error::param("curve", "budgets must be strictly increasing"));
                }
                if metric == Metric::Hit && pt.value < prev.value {
                    return Err(Error::param(
                        "curve",
                        format!("hit curve decreases at n={}", pt.n),
                    ));
                }
            }
        }
        Ok(Self { metric, points })
    }

    pub fn value_at(&self, n: u32) -> Option<f64> {
        self.points.iter().find(|pt| pt.n == n).map(|pt| pt.value)
    }

    /// `n,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_csv(&self.points, writer)
    }
}

/// Serializes rows as CSV with a header derived from the field names.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

fn check_budget<'a>(problems: &[ProblemLog<'a>], n: usize) -> Result<()> {
    if problems.is_empty() {
        return Err(Error::Empty { what: "log" });
    }
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if let Some(short) = problems.iter().find(|p| p.units() < n) {
        return Err(Error::InvalidLog(format!(
            "problem `{}` ({}) has {} units, metric needs {n}",
            short.problem_id,
            short.strategy,
            short.units()
        )));
    }
    Ok(())
}

/// Fraction of problems with at least one correct record among their first `n` units.
pub fn hit_at_n(problems: &[ProblemLog<'_>], n: usize) -> Result<f64> {
    check_budget(problems, n)?;
    let hits = problems
        .iter()
        .filter(|p| p.records[..n].iter().any(|r| r.correct))
        .count();
    Ok(hits as f64 / problems.len() as f64)
}

/// Final-answer accuracy at budget `n`.
///
/// Parallel problems take the majority answer key over the first `n` units;
/// sequential problems take the round-`n` answer as is.
pub fn accuracy_at_n(problems: &[ProblemLog<'_>], n: usize) -> Result<f64> {
    check_budget(problems, n)?;
    let mut correct = 0usize;
    for problem in problems {
        let ok = match problem.strategy {
            Strategy::Parallel => {
                majority_vote(&problem.records[..n])
                    .map_err(|e| match e {
                        Error::InvalidLog(m) => {
                            Error::InvalidLog(format!("problem `{}`: {m}", problem.problem_id))
                        }
                        other => other,
                    })?
                    .correct
            }
            Strategy::Sequential => problem.records[n - 1].correct,
        };
        correct += ok as usize;
    }
    Ok(correct as f64 / problems.len() as f64)
}

/// Record carrying the winning answer key.
///
/// The most frequent key wins; among tied keys the one whose earliest unit
/// comes first wins.
pub fn majority_vote(records: &[GenerationRecord]) -> Result<&GenerationRecord> {
    // key -> (votes, position of first occurrence)
    let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
    for (pos, record) in records.iter().enumerate() {
        let key = record.answer_key.as_deref().ok_or_else(|| {
            Error::InvalidLog(format!(
                "unit {} has no answer_key; majority vote needs one",
                record.unit
            ))
        })?;
        tally.entry(key).or_insert((0, pos)).0 += 1;
    }
    let (_, first) = tally
        .values()
        .copied()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .ok_or(Error::Empty { what: "vote" })?;
    Ok(&records[first])
}

pub fn hit_curve(problems: &[ProblemLog<'_>], n_max: usize) -> Result<ScalingCurve> {
    curve(problems, n_max, Metric::Hit, hit_at_n)
}

pub fn accuracy_curve(problems: &[ProblemLog<'_>], n_max: usize) -> Result<ScalingCurve> {
    curve(problems, n_max, Metric::Accuracy, accuracy_at_n)
}

fn curve(
    problems: &[ProblemLog<'_>],
    n_max: usize,
    metric: Metric,
    at: fn(&[ProblemLog<'_>], usize) -> Result<f64>,
) -> Result<ScalingCurve> {
    let points = (1..=n_max)
        .map(|n| {
            Ok(CurvePoint {
                n: n as u32,
                value: at(problems, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingCurve::new(metric, points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub n_points: usize,
    pub excluded_unsolved: usize,
}

/// Predicted and observed saturation budgets for one problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPair {
    pub predicted: f64,
    pub observed: f64,
    pub unsolved: bool,
}

/// Pearson correlation coefficient of paired samples.
pub fn pearson(predicted: &[f64], observed: &[f64]) -> Result<CorrelationReport> {
    if predicted.len() != observed.len() {
        return Err(Error::param(
            "pearson",
            format!(
                "length mismatch: {} predicted vs {} observed",
                predicted.len(),
                observed.len()
            ),
        ));
    }
    let n = predicted.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "pearson correlation needs at least 2 points, got {n}"
        )));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(predicted), mean(observed));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in predicted.iter().zip(observed) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance {
            side: Side::Predicted,
        });
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance {
            side: Side::Observed,
        });
    }
    Ok(CorrelationReport {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        n_points: n,
        excluded_unsolved: 0,
    })
}

/// Pearson over pairs, dropping unsolved problems unless `include_unsolved`.
pub fn pearson_pairs(
    pairs: &[SaturationPair],
    include_unsolved: bool,
) -> Result<CorrelationReport> {
    let kept: Vec<&SaturationPair> = pairs
        .iter()
        .filter(|p| include_unsolved || !p.unsolved)
        .collect();
    let predicted: Vec<f64> = kept.iter().map(|p| p.predicted).collect();
    let observed: Vec<f64> = kept.iter().map(|p| p.observed).collect();
    let mut report = pearson(&predicted, &observed)?;
    report.excluded_unsolved = pairs.len() - kept.len();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub n: u32,
    pub count: u64,
}

/// Counts of observed saturation budgets over `1..=n_max`.
pub fn saturation_histogram(observed: &[u32], n_max: u32) -> Result<Vec<HistogramBin>> {
    if observed.is_empty() {
        return Err(Error::Empty {
            what: "observed saturations",
        });
    }
    let mut counts = vec![0u64; n_max as usize];
    for &n in observed {
        if n == 0 || n > n_max {
            return Err(Error::param(
                "observed saturation",
                format!("{n} outside 1..={n_max}"),
            ));
        }
        counts[n as usize - 1] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            n: i as u32 + 1,
            count,
        })
        .collect())
}
