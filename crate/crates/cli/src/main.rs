//! Command-line front end: planning (`plan`), design evaluation (`eval`),
//! curve/chart data (`curve`), and seeded coverage simulation (`simulate`),
//! with CSV or JSON output.
//!
//! Exit codes: 0 success, 2 usage error, 3 design target unreachable,
//! 4 numeric domain error.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use invbinom::confidence::{
    asymptotic_guarantee_condition, confidence_curve, coverage_window, exact_confidence,
    scan_infimum,
};
use invbinom::design::{
    general_sufficient_condition, global_guarantee_condition, min_r_for_confidence, threshold_h,
    MIN_R_CAP,
};
use invbinom::model::{asymptotic_confidence, optimal_confidence, optimal_omega};
use invbinom::montecarlo::{coverage_experiment, wilson_interval};
use invbinom::{Error as CoreError, EstimatorSpec64, RelativeInterval64, Shape};

use output::{Format, OutputRecord, Table, Value};

const EXIT_USAGE: u8 = 2;
const EXIT_UNREACHABLE: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "invbinom",
    version,
    about = "Plan and analyze estimation of a Bernoulli probability by inverse binomial \
             sampling with a guaranteed relative-interval confidence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the smallest success count r meeting a confidence target
    Plan(PlanArgs),
    /// Evaluate confidences and guarantee conditions for a design
    Eval(EvalArgs),
    /// Emit confidence-curve rows, or design-chart rows with --figure1
    Curve(CurveArgs),
    /// Run a seeded, reproducible Monte Carlo coverage experiment
    Simulate(SimulateArgs),
}

/// Relative window selection: exactly one of the forms below.
#[derive(Args, Clone)]
#[command(group(ArgGroup::new("window").multiple(false)))]
struct IntervalArgs {
    /// Lower relative factor mu1 > 1 (window [p/mu2, p*mu1]); needs --mu2
    #[arg(
        long,
        requires = "mu2",
        group = "window",
        allow_negative_numbers = true
    )]
    mu1: Option<f64>,
    /// Upper relative factor mu2 > 1; needs --mu1
    #[arg(long, requires = "mu1", allow_negative_numbers = true)]
    mu2: Option<f64>,
    /// Symmetric relative error margin m > 0: mu1 = mu2 = 1 + m
    #[arg(long, group = "window", allow_negative_numbers = true)]
    m: Option<f64>,
    /// Margin m in (0,1) for |estimate - p| <= m*p: mu1 = 1+m, mu2 = 1/(1-m)
    #[arg(long = "m-abs", group = "window", allow_negative_numbers = true)]
    m_abs: Option<f64>,
    /// End-point ratio M = mu1*mu2 directly (split symmetrically as sqrt(M))
    #[arg(long, group = "window", allow_negative_numbers = true)]
    ratio: Option<f64>,
}

impl IntervalArgs {
    fn is_given(&self) -> bool {
        self.mu1.is_some() || self.m.is_some() || self.m_abs.is_some() || self.ratio.is_some()
    }

    fn resolve(&self, rec: &mut OutputRecord) -> Result<RelativeInterval64, Failure> {
        let iv = if let (Some(mu1), Some(mu2)) = (self.mu1, self.mu2) {
            RelativeInterval64::new(mu1, mu2)
        } else if let Some(m) = self.m {
            rec.input("m", m);
            RelativeInterval64::symmetric(m)
        } else if let Some(m) = self.m_abs {
            rec.input("m_abs", m);
            RelativeInterval64::absolute_error(m)
        } else if let Some(ratio) = self.ratio {
            RelativeInterval64::from_ratio(ratio)
        } else {
            return Err(Failure::usage(
                "exactly one of --mu1/--mu2, --m, --m-abs or --ratio is required",
            ));
        };
        let iv = iv.map_err(Failure::numeric)?;
        rec.input("mu1", iv.mu1());
        rec.input("mu2", iv.mu2());
        rec.input("ratio", iv.ratio());
        Ok(iv)
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write the record to a file instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    window: IntervalArgs,
    /// Target confidence level in (0, 1)
    #[arg(long)]
    confidence: f64,
    /// Accept designs meeting the target only asymptotically
    #[arg(long)]
    no_global: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Success count r >= 3
    #[arg(long)]
    r: u32,
    #[command(flatten)]
    window: IntervalArgs,
    /// Estimator numerator (default: the optimal one for the window)
    #[arg(long)]
    omega: Option<f64>,
    /// Estimator shift d (default: 1)
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Also evaluate the exact confidence at this p
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CurveArgs {
    /// Success count r >= 3 (curve mode)
    #[arg(long)]
    r: Option<u32>,
    #[command(flatten)]
    window: IntervalArgs,
    /// Estimator numerator (default: the optimal one for the window)
    #[arg(long)]
    omega: Option<f64>,
    /// Estimator shift d (default: 1)
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Smallest p of the curve range
    #[arg(long, default_value_t = 1e-4)]
    p_min: f64,
    /// Largest p of the curve range
    #[arg(long, default_value_t = 0.5)]
    p_max: f64,
    /// Log-spaced grid size (curve mode) or x-axis grid size (figure1 mode)
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Emit design-chart rows (sqrt(M)-1, r, c*, envelope flag) instead of a
    /// confidence curve
    #[arg(long)]
    figure1: bool,
    /// r values charted in figure1 mode
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "3,4,5,6,8,10,12,15,20,30,50,100"
    )]
    r_list: Vec<u32>,
    /// Smallest sqrt(M)-1 of the figure1 grid
    #[arg(long, default_value_t = 0.05)]
    x_min: f64,
    /// Largest sqrt(M)-1 of the figure1 grid
    #[arg(long, default_value_t = 3.0)]
    x_max: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Success count r >= 3
    #[arg(long)]
    r: u32,
    #[command(flatten)]
    window: IntervalArgs,
    /// True success probability to simulate at
    #[arg(long)]
    p: f64,
    /// Number of replicates
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    /// Seed; identical seeds reproduce the report bit for bit
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimator numerator (default: the optimal one for the window)
    #[arg(long)]
    omega: Option<f64>,
    /// Estimator shift d (default: 1)
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

/// A failed invocation: what to print on stderr and the exit code. The
/// unreachable-target case still emits its best-seen record first.
struct Failure {
    message: String,
    code: u8,
    record: Option<Box<(OutputRecord, OutputArgs)>>,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            message: msg.into(),
            code: EXIT_USAGE,
            record: None,
        }
    }

    fn numeric(err: CoreError) -> Self {
        Failure {
            message: err.to_string(),
            code: EXIT_NUMERIC,
            record: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if let Some(boxed) = failure.record {
                let (record, out) = *boxed;
                if let Err(io_err) = emit(&record, &out) {
                    eprintln!("error: {io_err}");
                    return ExitCode::FAILURE;
                }
            }
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn emit(record: &OutputRecord, out: &OutputArgs) -> std::io::Result<()> {
    let rendered = record.render(out.format);
    match &out.output {
        Some(path) => std::fs::write(path, rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn finish(record: OutputRecord, out: &OutputArgs) -> Result<(), Failure> {
    emit(&record, out).map_err(|e| Failure {
        message: format!("cannot write output: {e}"),
        code: 1,
        record: None,
    })
}

fn parse_shape(r: u32) -> Result<Shape, Failure> {
    Shape::new(r).map_err(Failure::numeric)
}

/// Estimator from optional --omega/--d, defaulting to the optimal numerator
/// and d = 1.
fn build_spec(
    r: Shape,
    iv: &RelativeInterval64,
    omega: Option<f64>,
    d: Option<f64>,
    rec: &mut OutputRecord,
) -> Result<EstimatorSpec64, Failure> {
    let omega = omega.unwrap_or_else(|| optimal_omega(r, iv));
    let d = d.unwrap_or(1.0);
    rec.input("omega", omega);
    rec.input("d", d);
    EstimatorSpec64::new(r, omega, d).map_err(Failure::numeric)
}

fn cmd_plan(args: PlanArgs) -> Result<(), Failure> {
    let mut rec = OutputRecord::new("plan");
    let iv = args.window.resolve(&mut rec)?;
    rec.input("confidence", args.confidence);
    rec.input("require_global", !args.no_global);
    let ratio = iv.ratio();

    match min_r_for_confidence(ratio, args.confidence, !args.no_global) {
        Ok(plan) => {
            let r = plan.r;
            let lower_coeff = r.get() as f64 * ratio.ln() / (ratio - 1.0);
            rec.output("r", r.get());
            rec.output("c_star", plan.c_star);
            rec.output("omega_star", optimal_omega(r, &iv));
            rec.output("d", 1.0);
            // interval estimate is [lower/(N+1), upper/(N+1)]
            rec.output("interval_lower_coeff", lower_coeff);
            rec.output("interval_upper_coeff", ratio * lower_coeff);
            rec.output("global_condition_met", plan.global_condition_met);
            rec.output("binding_condition", plan.binding_condition.to_string());
            rec.output("threshold_ratio", threshold_h::<f64>(r));
            finish(rec, &args.out)
        }
        Err(CoreError::TargetUnreachable {
            cap,
            best_r,
            best_confidence,
        }) => {
            rec.output("reachable", false);
            rec.output("cap", cap);
            rec.output("best_r", best_r);
            rec.output("best_c_star", best_confidence);
            Err(Failure {
                message: format!(
                    "confidence target {} unreachable within r <= {cap}; best c* = \
                     {best_confidence} at r = {best_r}",
                    args.confidence
                ),
                code: EXIT_UNREACHABLE,
                record: Some(Box::new((rec, args.out.clone()))),
            })
        }
        Err(err) => Err(Failure::numeric(err)),
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let mut rec = OutputRecord::new("eval");
    let r = parse_shape(args.r)?;
    rec.input("r", r.get());
    let iv = args.window.resolve(&mut rec)?;
    let spec = build_spec(r, &iv, args.omega, args.d, &mut rec)?;
    let ratio = iv.ratio();

    rec.output(
        "c_star",
        optimal_confidence(r, ratio).map_err(Failure::numeric)?,
    );
    rec.output("c_bar", asymptotic_confidence(&spec, &iv));
    rec.output(
        "cond_asymptotic",
        asymptotic_guarantee_condition(r, ratio, spec.shift()).map_err(Failure::numeric)?,
    );
    if spec.shift() == 1.0 {
        rec.output(
            "cond_general_d1",
            general_sufficient_condition(&spec, &iv).map_err(Failure::numeric)?,
        );
    } else {
        rec.output("cond_general_d1", Value::Null);
    }
    rec.output(
        "cond_global_optimal",
        global_guarantee_condition(r, ratio).map_err(Failure::numeric)?,
    );
    if let Some(p) = args.p {
        rec.input("p", p);
        let w = coverage_window(&spec, &iv, p).map_err(Failure::numeric)?;
        rec.output("window_n1", w.n1);
        rec.output("window_n2", w.n2);
        rec.output(
            "c_p",
            exact_confidence(&spec, &iv, p).map_err(Failure::numeric)?,
        );
    }
    finish(rec, &args.out)
}

fn cmd_curve(args: CurveArgs) -> Result<(), Failure> {
    if args.figure1 {
        return cmd_curve_figure1(args);
    }
    let mut rec = OutputRecord::new("curve");
    let r = parse_shape(args.r.ok_or_else(|| {
        Failure::usage("curve mode requires --r (or pass --figure1 for chart data)")
    })?)?;
    rec.input("r", r.get());
    let iv = args.window.resolve(&mut rec)?;
    let spec = build_spec(r, &iv, args.omega, args.d, &mut rec)?;
    rec.input("p_min", args.p_min);
    rec.input("p_max", args.p_max);
    rec.input("grid", args.grid as u64);

    let curve = confidence_curve(&spec, &iv, args.p_min, args.p_max, args.grid)
        .map_err(Failure::numeric)?;
    let (p_at_min, c_min) = scan_infimum(&curve).map_err(Failure::numeric)?;
    rec.output("points", curve.points().len() as u64);
    rec.output("breakpoints", curve.breakpoints().len() as u64);
    rec.output("p_at_min", p_at_min);
    rec.output("c_min", c_min);
    rec.table = Some(Table {
        columns: vec!["p", "c"],
        rows: curve
            .points()
            .iter()
            .map(|&(p, c)| vec![Value::Float(p), Value::Float(c)])
            .collect(),
    });
    finish(rec, &args.out)
}

fn cmd_curve_figure1(args: CurveArgs) -> Result<(), Failure> {
    if args.window.is_given() || args.r.is_some() {
        return Err(Failure::usage(
            "--figure1 charts a grid of ratios; drop the window flags and --r",
        ));
    }
    if !(args.x_min > 0.0 && args.x_min < args.x_max) || args.grid < 2 {
        return Err(Failure::usage(
            "require 0 < --x-min < --x-max and --grid >= 2",
        ));
    }
    let mut rec = OutputRecord::new("figure1");
    rec.input("x_min", args.x_min);
    rec.input("x_max", args.x_max);
    rec.input("grid", args.grid as u64);
    let mut r_list: Vec<u32> = args.r_list.clone();
    r_list.sort_unstable();
    r_list.dedup();
    if r_list.iter().any(|&r| r < Shape::MIN) {
        return Err(Failure::numeric(CoreError::Domain(
            "success count r must be at least 3",
        )));
    }

    let mut rows = Vec::new();
    for k in 0..args.grid {
        let x = args.x_min + (args.x_max - args.x_min) * k as f64 / (args.grid - 1) as f64;
        let ratio = (1.0 + x) * (1.0 + x);
        // envelope: smallest r whose sufficient condition holds at this ratio
        let envelope_r = (Shape::MIN..=MIN_R_CAP)
            .find(|&r| global_guarantee_condition(Shape::new(r).unwrap(), ratio).unwrap())
            .expect("condition holds for large enough r at any M > 1");
        let mut emit_row = |r: u32, envelope: bool| {
            let c = optimal_confidence(Shape::new(r).unwrap(), ratio).unwrap();
            rows.push(vec![
                Value::Float(x),
                Value::UInt(r as u64),
                Value::Float(c),
                Value::Bool(envelope),
            ]);
        };
        let mut envelope_emitted = false;
        for &r in &r_list {
            if r < envelope_r {
                continue; // condition fails; the chart omits uncertified points
            }
            emit_row(r, r == envelope_r);
            envelope_emitted |= r == envelope_r;
        }
        if !envelope_emitted {
            emit_row(envelope_r, true);
        }
    }
    rec.output("rows", rows.len() as u64);
    rec.table = Some(Table {
        columns: vec!["sqrtM_minus_1", "r", "c_star", "envelope"],
        rows,
    });
    finish(rec, &args.out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut rec = OutputRecord::new("simulate");
    let r = parse_shape(args.r)?;
    rec.input("r", r.get());
    let iv = args.window.resolve(&mut rec)?;
    let spec = build_spec(r, &iv, args.omega, args.d, &mut rec)?;
    rec.input("p", args.p);
    rec.input("reps", args.reps);
    rec.input("seed", args.seed);

    let report =
        coverage_experiment(&spec, &iv, args.p, args.reps, args.seed).map_err(Failure::numeric)?;
    let analytic = exact_confidence(&spec, &iv, args.p).map_err(Failure::numeric)?;
    let (lo3, hi3) = wilson_interval(report.hits, report.reps, 3.0);

    rec.output("hits", report.hits);
    rec.output("coverage", report.coverage);
    rec.output("wilson_low", report.wilson_low);
    rec.output("wilson_high", report.wilson_high);
    rec.output("mean_stopping_time", report.mean_stopping_time);
    rec.output("expected_mean_stopping_time", r.get() as f64 / args.p);
    rec.output("analytic_confidence", analytic);
    rec.output("agree_3sigma", lo3 <= analytic && analytic <= hi3);
    finish(rec, &args.out)
}
