//! `plateau` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 data validation, 3 numeric or
//! degenerate analysis error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{
    fit_aggregate_curve, Calibration, RatioGrid, SequentialEstimator, SplitSpec,
};
use crate::ingest::{self, RecordSet, Strategy};
use crate::metrics::{self, CurvePoint};
use crate::model::{GainThreshold, SaturationPoint, ScalingModel};
use crate::pipeline::{self, AnalysisOptions, PlateauRule};
use crate::simulator::{simulate, ProbabilitySource, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "plateau",
    version,
    about = "Test-time scaling plateau prediction and verification"
)]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (directory for `evaluate`); stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic JSONL log.
    Simulate(SimulateArgs),
    /// Per-problem p_hat and plateau budget N*.
    Predict(PredictArgs),
    /// Fit the epsilon/f_max ratio on a whole log.
    Calibrate(CalibrateArgs),
    /// Split, calibrate, predict and correlate with observed saturation.
    Evaluate(EvaluateArgs),
    /// Closed-form F(N) and marginal gain for one model.
    Curve(CurveArgs),
    /// Fit (p_x, f_max) to a log's Hit@N curve.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    strategy: Strategy,
    /// Fixed per-unit success probability.
    #[arg(long, required_unless_present_all = ["p_min", "p_max"], conflicts_with_all = ["p_min", "p_max"])]
    p: Option<f64>,
    /// Lower end of a per-problem Uniform(p_min, p_max) success probability.
    #[arg(long, requires = "p_max")]
    p_min: Option<f64>,
    #[arg(long, requires = "p_min")]
    p_max: Option<f64>,
    #[arg(long, default_value_t = 32)]
    n_max: u32,
    #[arg(long)]
    problems: usize,
    #[arg(long, default_value_t = 4)]
    distractors: u32,
    /// Fraction of problems that are solvable.
    #[arg(long, default_value_t = 1.0)]
    f_max: f64,
}

#[derive(Debug, Args)]
struct LogArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    #[arg(long, value_enum, default_value_t = SequentialEstimator::FirstSolveRatio)]
    sequential_estimator: SequentialEstimator,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, default_value_t = 1e-6)]
    grid_min: f64,
    #[arg(long, default_value_t = 1.0)]
    grid_max: f64,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    #[arg(long, default_value_t = 41)]
    refine_points: usize,
    /// Keep never-solved problems in calibration and correlation.
    #[arg(long)]
    include_unsolved: bool,
}

impl GridArgs {
    fn options(&self, estimator: SequentialEstimator) -> AnalysisOptions {
        AnalysisOptions {
            estimator,
            grid: RatioGrid {
                min: self.grid_min,
                max: self.grid_max,
                points: self.grid_points,
                refine_points: self.refine_points,
            },
            include_unsolved: self.include_unsolved,
            ..AnalysisOptions::default()
        }
    }
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    log: LogArgs,
    /// Calibration JSON holding `ratio`.
    #[arg(long, conflicts_with_all = ["epsilon", "f_max"])]
    calibration: Option<PathBuf>,
    #[arg(long, requires = "f_max")]
    epsilon: Option<f64>,
    #[arg(long, requires = "epsilon")]
    f_max: Option<f64>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    log: LogArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    log: LogArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Validation share of the problems.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    f_max: f64,
    #[arg(long, default_value_t = 32)]
    n_max: u32,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    log: LogArgs,
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Predict(args) => cmd_predict(cli, args),
        Command::Calibrate(args) => cmd_calibrate(cli, args),
        Command::Evaluate(args) => cmd_evaluate(cli, args),
        Command::Curve(args) => cmd_curve(cli, args),
        Command::Fit(args) => cmd_fit(cli, args),
    }
}

fn read_log(path: &Path) -> Result<RecordSet> {
    let file = File::open(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    ingest::parse_log(BufReader::new(file))
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn table_bytes<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(rows),
        Format::Csv => {
            let mut buf = Vec::new();
            metrics::write_csv(rows, &mut buf)?;
            Ok(buf)
        }
    }
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let p = match (args.p, args.p_min, args.p_max) {
        (Some(p), _, _) => ProbabilitySource::Fixed(p),
        (None, Some(low), Some(high)) => ProbabilitySource::Uniform { low, high },
        _ => return Err(Error::param("p", "give --p or both --p-min and --p-max")),
    };
    let config = SimConfig {
        strategy: args.strategy,
        p,
        n_max: args.n_max,
        num_problems: args.problems,
        distractors: args.distractors,
        f_max: args.f_max,
        seed: cli.seed,
    };
    let set = simulate(&config)?.to_record_set();
    write_bytes(cli.output.as_deref(), ingest::emit_string(&set).as_bytes())
}

fn cmd_predict(cli: &Cli, args: &PredictArgs) -> Result<()> {
    let rule = match (&args.calibration, args.epsilon, args.f_max) {
        (Some(path), _, _) => {
            let calibration: Calibration = serde_json::from_slice(&fs::read(path)?)?;
            PlateauRule::Ratio(calibration.ratio)
        }
        (None, Some(epsilon), Some(f_max)) => {
            GainThreshold::new(epsilon)?;
            ScalingModel::new(0.5, f_max)?;
            PlateauRule::Explicit { epsilon, f_max }
        }
        _ => {
            return Err(Error::param(
                "plateau threshold",
                "give --calibration or both --epsilon and --f-max",
            ))
        }
    };
    let set = read_log(&args.log.log)?;
    let mut rows = pipeline::predict_log(&set, rule, args.log.sequential_estimator)?;
    if let Some(strategy) = args.log.strategy {
        rows.retain(|r| r.strategy == strategy);
    }
    write_bytes(cli.output.as_deref(), &table_bytes(&rows, cli.format)?)
}

fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs) -> Result<()> {
    let set = read_log(&args.log.log)?;
    let strategy = pipeline::select_strategy(&set, args.log.strategy)?;
    let calibration = pipeline::calibrate_log(
        &set,
        strategy,
        &args.grid.options(args.log.sequential_estimator),
    )?;
    write_bytes(cli.output.as_deref(), &json_bytes(&calibration)?)
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let split = SplitSpec::new(args.split, cli.seed)?;
    let options = args.grid.options(args.log.sequential_estimator);
    let set = read_log(&args.log.log)?;
    let strategy = pipeline::select_strategy(&set, args.log.strategy)?;
    let report = pipeline::evaluate_log(&set, strategy, split, &options)?;

    let Some(dir) = cli.output.as_deref() else {
        return write_bytes(None, &json_bytes(&report)?);
    };
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), json_bytes(&report)?)?;
    fs::write(
        dir.join("calibration.json"),
        json_bytes(&report.calibration)?,
    )?;
    let ext = match cli.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    fs::write(
        dir.join(format!("hit_curve.{ext}")),
        table_bytes(&report.hit_curve, cli.format)?,
    )?;
    fs::write(
        dir.join(format!("accuracy_curve.{ext}")),
        table_bytes(&report.accuracy_curve, cli.format)?,
    )?;
    fs::write(
        dir.join(format!("saturation_histogram.{ext}")),
        table_bytes(&report.saturation_histogram, cli.format)?,
    )?;
    fs::write(
        dir.join(format!("predictions.{ext}")),
        table_bytes(&report.test_predictions, cli.format)?,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ModelPoint {
    n: u32,
    hit: f64,
    marginal_gain: f64,
}

#[derive(Serialize)]
struct CurveDocument<'a> {
    model: ScalingModel,
    saturation: Option<SaturationPoint>,
    points: &'a [ModelPoint],
}

fn cmd_curve(cli: &Cli, args: &CurveArgs) -> Result<()> {
    let model = ScalingModel::new(args.p, args.f_max)?;
    if args.n_max == 0 {
        return Err(Error::param("n_max", "must be >= 1"));
    }
    let saturation = args
        .epsilon
        .map(|e| GainThreshold::new(e).map(|t| model.saturation_point(t)))
        .transpose()?;
    let points: Vec<ModelPoint> = (1..=args.n_max)
        .map(|n| ModelPoint {
            n,
            hit: model.hit_probability(n as u64),
            marginal_gain: model.marginal_gain(n as u64),
        })
        .collect();
    let bytes = match cli.format {
        Format::Json => json_bytes(&CurveDocument {
            model,
            saturation,
            points: &points,
        })?,
        Format::Csv => table_bytes(&points, Format::Csv)?,
    };
    write_bytes(cli.output.as_deref(), &bytes)
}

#[derive(Serialize)]
struct FitDocument<'a> {
    strategy: Strategy,
    model: ScalingModel,
    hit_curve: &'a [CurvePoint],
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let set = read_log(&args.log.log)?;
    let strategy = pipeline::select_strategy(&set, args.log.strategy)?;
    let problems = set.problems_for(strategy);
    let n_max = problems.iter().map(|p| p.units()).min().unwrap_or(0);
    let curve = metrics::hit_curve(&problems, n_max)?;
    let model = fit_aggregate_curve(&curve)?;
    write_bytes(
        cli.output.as_deref(),
        &json_bytes(&FitDocument {
            strategy,
            model,
            hit_curve: &curve.points,
        })?,
    )
}
