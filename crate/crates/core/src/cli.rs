//! The `sgapproach` command line.
//!
//! Exit codes: 0 on success, 2 when an input fails validation, 3 when a
//! computation fails. Errors print as a single line on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::approach::{check_approachable_convex, check_approachable_nonconvex, PointSampler};
use crate::error::Error;
use crate::geometry::TargetSet;
use crate::model::{check_irreducibility, GameModel, ModelFile};
use crate::planner::{scalarize, solve_minmax, PlannerOptions};
use crate::report::{load_config, load_series_dir, run_batch, write_svg, LeaderChoice};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Directions swept by `check` on a convex target when none are given.
pub const DEFAULT_DIRECTIONS: usize = 360;
/// Points sampled by `check` on a union target when none are given.
pub const DEFAULT_POINTS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "sgapproach", version, about = "Approachability for Stackelberg stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file's shapes, kernel rows, cost bounds and irreducibility.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Solve the scalarized min-max problem along a direction.
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated direction, normalized before solving.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
    /// Test the approachability condition and print a JSON certificate.
    Check(CheckArgs),
    /// Run a seed batch with the leader named in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a seed batch with the learning leader.
    Learn {
        #[arg(long)]
        config: PathBuf,
    },
    /// Chart every trajectory CSV in a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Directions to sweep (convex targets).
    #[arg(long, conflicts_with = "points")]
    directions: Option<usize>,
    /// Points to sample outside the target (any target, required style for unions).
    #[arg(long)]
    points: Option<usize>,
    /// Seed for sampled directions or points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn validation(e: impl ToString) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }

    /// Input problems map to 2 even when found late; the rest to 3.
    fn from_run(e: Error) -> Self {
        let code = match root(&e) {
            Error::InvalidModel(_)
            | Error::InvalidTarget(_)
            | Error::InvalidPolicy(_)
            | Error::IndexOutOfRange(_)
            | Error::NonUnitDirection(_)
            | Error::Config(_)
            | Error::Json { .. } => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn root(e: &Error) -> &Error {
    match e {
        Error::AtStep { source, .. } => root(source),
        other => other,
    }
}

fn one_line(s: &str) -> String {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}

/// Parses a direction like `0.7,-0.7` (a Unicode minus sign is accepted).
pub fn parse_lambda(text: &str) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = text
        .replace('\u{2212}', "-")
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad lambda component {:?}", t.trim()))
        })
        .collect::<Result<_, _>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err("lambda components must be finite".into());
    }
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len == 0.0 {
        return Err("lambda must be nonzero".into());
    }
    Ok(v.iter().map(|x| x / len).collect())
}

fn load_model(path: &Path) -> Result<GameModel, CliError> {
    GameModel::load(path).map_err(CliError::validation)
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn validate(path: &Path) -> Result<(), CliError> {
    let file = ModelFile::load(path).map_err(CliError::validation)?;
    let report = file.validate();
    if !report.is_ok() {
        for v in &report.violations {
            println!("violation: {v}");
        }
        return Err(CliError::validation(format!(
            "{}: {} violation(s)",
            path.display(),
            report.violations.len()
        )));
    }
    let model = file.into_model().map_err(CliError::validation)?;
    let irr = check_irreducibility(&model);
    println!(
        "model ok: |S|={} |A1|={} |A2|={} K={}",
        model.n_states(),
        model.n_actions1(),
        model.n_actions2(),
        model.cost_dim()
    );
    println!("irreducibility: {irr}");
    if irr.witness.is_some() {
        return Err(CliError::validation(format!(
            "{}: some stationary pair induces a reducible chain",
            path.display()
        )));
    }
    Ok(())
}

fn solve(model_path: &Path, lambda: &str) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    let lambda = parse_lambda(lambda).map_err(CliError::validation)?;
    let game = scalarize(&model, &lambda).map_err(CliError::validation)?;
    let sol = solve_minmax(&game, &PlannerOptions::default()).map_err(CliError::from_run)?;
    print_json(&json!({
        "lambda": lambda,
        "value": sol.value,
        "leader_policy": sol.leader_policy,
        "follower_response": sol.follower_response,
        "optimal_leader_actions": sol.optimal_leader_actions,
        "leader_gain": sol.leader_gain,
        "follower_gain": sol.follower_gain,
        "iterations": sol.iterations,
    }));
    Ok(())
}

fn check(args: &CheckArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let target = TargetSet::load(&args.target).map_err(CliError::validation)?;
    if target.dim() != model.cost_dim() {
        return Err(CliError::validation(format!(
            "target has dimension {}, model has K = {}",
            target.dim(),
            model.cost_dim()
        )));
    }
    let opts = PlannerOptions::default();
    let convex = target.is_convex();
    if let (false, Some(_)) = (convex, args.directions) {
        return Err(CliError::validation(
            "--directions needs a convex target; use --points for unions",
        ));
    }
    let value = if convex && args.points.is_none() {
        let n = args.directions.unwrap_or(DEFAULT_DIRECTIONS);
        let cert = check_approachable_convex(&model, &target, n, &opts).map_err(CliError::from_run)?;
        serde_json::to_value(cert)
    } else {
        let n = args.points.unwrap_or(DEFAULT_POINTS);
        let sampler = PointSampler::cost_box(model.cost_dim(), args.seed);
        let rep = check_approachable_nonconvex(&model, &target, &sampler, n, &opts)
            .map_err(CliError::from_run)?;
        serde_json::to_value(rep)
    };
    print_json(&value.map_err(|e| CliError::from_run(Error::InsufficientData(e.to_string())))?);
    Ok(())
}

fn batch(config: &Path, force_learn: bool) -> Result<(), CliError> {
    let mut cfg = load_config(config).map_err(CliError::validation)?;
    if force_learn {
        cfg.leader = LeaderChoice::Learn;
    }
    let out = run_batch(&cfg).map_err(CliError::from_run)?;
    for s in &out.aggregate.seeds {
        let slope = s
            .loglog_slope
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "undefined".into());
        println!(
            "seed {}: final dist {:.6e}, log-log slope {slope}, recomputes {}",
            s.seed, s.final_dist, s.policy_recompute_count
        );
    }
    if let Some(m) = out.aggregate.median_final_dist {
        println!("median final dist {m:.6e}");
    }
    println!("wrote {}", out.output_dir.display());
    Ok(())
}

fn report(input: &Path, out: &Path) -> Result<(), CliError> {
    let series = load_series_dir(input).map_err(CliError::validation)?;
    if series.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no traj_seed*.csv files",
            input.display()
        )));
    }
    write_svg(&series, out).map_err(CliError::from_run)?;
    println!("wrote {} ({} series)", out.display(), series.len());
    Ok(())
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return EXIT_VALIDATION;
        }
    };
    let result = match &cli.command {
        Command::Validate { model } => validate(model),
        Command::Solve { model, lambda } => solve(model, lambda),
        Command::Check(args) => check(args),
        Command::Run { config } => batch(config, false),
        Command::Learn { config } => batch(config, true),
        Command::Report { input, out } => report(input, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.message));
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_parsing() {
        let l = parse_lambda("0.7,\u{2212}0.7").unwrap();
        assert!((l[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((l[1] + 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(parse_lambda(" 3 , 4 ").unwrap(), vec![0.6, 0.8]);
        assert!(parse_lambda("0,0").is_err());
        assert!(parse_lambda("1,x").is_err());
        assert!(parse_lambda("nan,1").is_err());
    }

    #[test]
    fn errors_flatten_to_one_line() {
        assert_eq!(one_line("a\n  b\n\nc"), "a; b; c");
    }

    #[test]
    fn step_errors_keep_their_class() {
        let e = Error::Config("x".into()).at_step(4);
        assert_eq!(CliError::from_run(e).code, EXIT_VALIDATION);
        let e = Error::ScriptExhausted(3).at_step(4);
        assert_eq!(CliError::from_run(e).code, EXIT_RUNTIME);
    }

    #[test]
    fn bad_arguments_exit_2() {
        assert_eq!(main_with_args(["sgapproach", "frobnicate"]), EXIT_VALIDATION);
        assert_eq!(
            main_with_args(["sgapproach", "check", "--model", "m", "--target", "t", "--directions", "3", "--points", "4"]),
            EXIT_VALIDATION
        );
    }
}
