//! Monte Carlo oracle for both scaling paradigms.
//!
//! Parallel problems draw `n_max` independent Bernoulli(p) samples. Sequential
//! problems follow the two-state chain: each round moves to the correct state
//! with probability p and stays there. Every problem owns a ChaCha8 stream
//! (`seed`, stream = problem index), so results do not depend on how problems
//! are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{GenerationRecord, RecordSet, Strategy};
use crate::metrics::{CurvePoint, Metric, ScalingCurve};
use crate::model::check_unit_interval;

/// Answer key carried by correct simulated records.
pub const GOLD_KEY: &str = "GOLD";

/// Where each problem's success probability comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbabilitySource {
    Fixed(f64),
    /// Per-problem `p ~ Uniform(low, high)`.
    Uniform {
        low: f64,
        high: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub p: ProbabilitySource,
    pub n_max: u32,
    pub num_problems: usize,
    /// Number of distinct wrong answer keys.
    pub distractors: u32,
    /// Fraction of problems that are solvable at all.
    pub f_max: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(strategy: Strategy, p_x: f64, n_max: u32, num_problems: usize, seed: u64) -> Self {
        Self {
            strategy,
            p: ProbabilitySource::Fixed(p_x),
            n_max,
            num_problems,
            distractors: 4,
            f_max: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.p {
            ProbabilitySource::Fixed(p) => check_unit_interval("p", p)?,
            ProbabilitySource::Uniform { low, high } => {
                check_unit_interval("p range low", low)?;
                check_unit_interval("p range high", high)?;
                if low > high {
                    return Err(Error::param(
                        "p range",
                        format!("low {low} exceeds high {high}"),
                    ));
                }
            }
        }
        check_unit_interval("f_max", self.f_max)?;
        if self.n_max == 0 {
            return Err(Error::param("n_max", "must be >= 1"));
        }
        if self.num_problems == 0 {
            return Err(Error::param("num_problems", "must be >= 1"));
        }
        if self.distractors == 0 {
            return Err(Error::param("distractors", "must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of one simulated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SimProblem {
    /// Ground-truth per-unit success probability.
    pub p: f64,
    pub solvable: bool,
    /// Answer key index per unit: 0 is the gold answer, `1..=distractors` are wrong.
    pub keys: Vec<u32>,
}

impl SimProblem {
    pub fn correct(&self, unit_index: usize) -> bool {
        self.keys[unit_index] == 0
    }

    /// 1-based index of the first correct unit.
    pub fn first_correct(&self) -> Option<u32> {
        self.keys.iter().position(|&k| k == 0).map(|i| i as u32 + 1)
    }
}

/// Simulated log in compact form; see [`SimTrace::to_record_set`] for records.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub strategy: Strategy,
    pub n_max: u32,
    pub problems: Vec<SimProblem>,
}

pub fn simulate(config: &SimConfig) -> Result<SimTrace> {
    simulate_with(config, Execution::default())
}

pub fn simulate_with(config: &SimConfig, exec: Execution) -> Result<SimTrace> {
    config.validate()?;
    let problems = exec.map_range(config.num_problems, |i| simulate_problem(config, i as u64));
    Ok(SimTrace {
        strategy: config.strategy,
        n_max: config.n_max,
        problems,
    })
}

fn simulate_problem(config: &SimConfig, index: u64) -> SimProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);

    let p = match config.p {
        ProbabilitySource::Fixed(p) => p,
        ProbabilitySource::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
    };
    let solvable = config.f_max >= 1.0 || rng.random::<f64>() < config.f_max;

    let mut keys = Vec::with_capacity(config.n_max as usize);
    let mut solved = false;
    for _ in 0..config.n_max {
        let correct = match config.strategy {
            Strategy::Parallel => solvable && rng.random::<f64>() < p,
            Strategy::Sequential => {
                if !solved && solvable && rng.random::<f64>() < p {
                    solved = true;
                }
                solved
            }
        };
        keys.push(if correct {
            0
        } else {
            rng.random_range(1..=config.distractors)
        });
    }
    SimProblem { p, solvable, keys }
}

impl SimTrace {
    /// Zero-padded so lexicographic order matches simulation order.
    pub fn problem_id(&self, index: usize) -> String {
        let width = self
            .problems
            .len()
            .saturating_sub(1)
            .to_string()
            .len()
            .max(6);
        format!("sim-{index:0width$}")
    }

    pub fn ground_truth_p(&self) -> Vec<f64> {
        self.problems.iter().map(|p| p.p).collect()
    }

    /// Every sequential problem stays correct once it is correct.
    pub fn is_absorbing(&self) -> bool {
        self.problems.iter().all(|p| match p.first_correct() {
            Some(first) => p.keys[first as usize - 1..].iter().all(|&k| k == 0),
            None => true,
        })
    }

    pub fn records(&self) -> Vec<GenerationRecord> {
        let mut out = Vec::with_capacity(self.problems.len() * self.n_max as usize);
        for (i, problem) in self.problems.iter().enumerate() {
            let id = self.problem_id(i);
            for (u, &key) in problem.keys.iter().enumerate() {
                out.push(GenerationRecord {
                    problem_id: id.clone(),
                    strategy: self.strategy,
                    unit: u as u32 + 1,
                    correct: key == 0,
                    answer_key: Some(if key == 0 {
                        GOLD_KEY.to_string()
                    } else {
                        format!("D{key}")
                    }),
                    meta: None,
                });
            }
        }
        out
    }

    pub fn to_record_set(&self) -> RecordSet {
        RecordSet::new(self.records()).expect("simulated records are valid")
    }

    /// Per-round counts of first successes; index `k - 1` holds round `k`.
    pub fn first_success_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_max as usize];
        for problem in &self.problems {
            if let Some(k) = problem.first_correct() {
                counts[k as usize - 1] += 1;
            }
        }
        counts
    }
}

/// Fraction of problems solved within the first `N` units, for `N = 1..=n_max`.
pub fn empirical_hit_curve(trace: &SimTrace, n_max: u32) -> Result<ScalingCurve> {
    if trace.problems.is_empty() {
        return Err(Error::Empty { what: "trace" });
    }
    if n_max == 0 {
        return Err(Error::param("n_max", "must be >= 1"));
    }
    if let Some(short) = trace
        .problems
        .iter()
        .position(|p| p.keys.len() < n_max as usize)
    {
        return Err(Error::InvalidLog(format!(
            "problem {} has {} units, curve needs {n_max}",
            trace.problem_id(short),
            trace.problems[short].keys.len()
        )));
    }

    let mut first = vec![0u64; n_max as usize];
    for problem in &trace.problems {
        if let Some(k) = problem.first_correct() {
            if k <= n_max {
                first[k as usize - 1] += 1;
            }
        }
    }
    let total = trace.problems.len() as f64;
    let mut solved = 0u64;
    let points = first
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            solved += c;
            CurvePoint {
                n: i as u32 + 1,
                value: solved as f64 / total,
            }
        })
        .collect();
    ScalingCurve::new(Metric::Hit, points)
}
