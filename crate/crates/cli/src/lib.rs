//! `flight`: command-line front end for `flight-core`.
//!
//! Exit status is 0 on success, 1 when a check or the exact-form bound
//! fails, and 2 on bad input or I/O errors.

pub mod instance;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use flight_core::bounds::{asymptotic_exponent, cross_welfare_ratio, theorem5_bounds};
use flight_core::checks::{
    check_concavity, check_location_invariance, check_max_shift, check_median_peak,
    check_shift_monotonicity, random_suite, CheckReport, SuiteConfig, Theorem,
};
use flight_core::stochastic::{expected_welfare, lln_experiment, DEFAULT_QUADRATURE_NODES};
use flight_core::{peak, peak_closed_form, welfare_curve, Mechanism};

pub use instance::{parse_instance, parse_utility, Instance};
pub use report::{emit_report, CompareRow, Comparison, Format, Payload, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: field `{field}`: {message}", path.display())]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{}: field `{field}`: {source}", path.display())]
    Invalid {
        path: PathBuf,
        field: String,
        source: flight_core::Error,
    },
    #[error("{0}")]
    Library(#[from] flight_core::Error),
    #[error("usage: {0}")]
    Usage(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "flight", version, about = "Facility location under generalized α-welfare")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel sections; 0 uses all cores. Output does
    /// not depend on this.
    #[arg(long, default_value_t = 0, global = true)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct InstanceArg {
    /// Instance file (JSON).
    pub instance: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Welfare-maximizing location.
    Solve(InstanceArg),
    /// Welfare on a uniform grid.
    Curve(InstanceArg),
    /// Peaks across several utilities, with median and midpoint references.
    Compare {
        #[command(flatten)]
        instance: InstanceArg,
        /// Additional utility (`family:k=v,...` or JSON); repeatable.
        #[arg(long)]
        beta: Vec<String>,
    },
    /// Structural checks on the instance, or a seeded random suite.
    Check {
        /// Instance file; omit together with --instances for the random suite.
        instance: Option<PathBuf>,
        /// Comma-separated theorem numbers from {1, 2, 3, 4, 8}.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,8")]
        theorems: Vec<u8>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run a random suite with this many instances.
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Approximation-ratio bounds at `--y`, or at the peak of `--beta`.
    Bounds {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long, conflicts_with = "beta")]
        y: Option<f64>,
        #[arg(long)]
        beta: Option<String>,
    },
    /// Upper-bound exponent over a schedule of agent counts.
    Asymptote {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000,10000")]
        n_schedule: Vec<usize>,
    },
    /// Expected welfare under the instance's distribution.
    Expected {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long, default_value_t = DEFAULT_QUADRATURE_NODES)]
        quadrature: usize,
    },
    /// Convergence of normalized welfare to its expectation.
    Converge {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long, default_value_t = 0.5)]
        y: f64,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
        n_schedule: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        /// Seed for the replicates; defaults to the instance seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// A report plus whether it records a mathematical failure.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub failed: bool,
}

fn theorems(numbers: &[u8]) -> Result<Vec<Theorem>, CliError> {
    numbers
        .iter()
        .map(|&k| {
            Theorem::from_number(k)
                .ok_or_else(|| CliError::Usage(format!("unknown theorem {k}; choose from 1,2,3,4,8")))
        })
        .collect()
}

fn outcome(command: &str, payload: Payload, failed: bool) -> Outcome {
    Outcome {
        report: Report {
            command: command.to_string(),
            payload,
        },
        failed,
    }
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Solve(arg) => {
            let inst = parse_instance(&arg.instance)?;
            let p = peak(&inst.utility, &inst.profile, inst.tolerance)?;
            Ok(outcome("solve", Payload::Peak(p), false))
        }
        Command::Curve(arg) => {
            let inst = parse_instance(&arg.instance)?;
            let c = welfare_curve(&inst.utility, &inst.profile, inst.grid_points)?;
            Ok(outcome("curve", Payload::Curve(c), false))
        }
        Command::Compare { instance, beta } => {
            let inst = parse_instance(&instance.instance)?;
            let mut utilities = vec![inst.utility.clone()];
            for b in beta {
                utilities.push(parse_utility(b)?);
            }
            if beta.is_empty() {
                for u in ["pmean:p=1", "pmean:p=2", "pmean:p=8", "nash_log"] {
                    utilities.push(parse_utility(u)?);
                }
            }
            let mut seen = std::collections::HashSet::new();
            utilities.retain(|u| seen.insert(u.id()));
            let rows = utilities
                .iter()
                .map(|u| {
                    let p = peak(u, &inst.profile, inst.tolerance)?;
                    Ok(CompareRow {
                        utility: u.id(),
                        peak: p.peak,
                        peak_welfare: p.peak_welfare,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(outcome(
                "compare",
                Payload::Comparison(Comparison {
                    median: peak_closed_form(Mechanism::Median, &inst.profile),
                    midpoint: peak_closed_form(Mechanism::Midpoint, &inst.profile),
                    rows,
                }),
                false,
            ))
        }
        Command::Check {
            instance,
            theorems: numbers,
            seed,
            instances,
        } => {
            let selected = theorems(numbers)?;
            let reports = match (instance, instances) {
                (None, Some(count)) => random_suite(&SuiteConfig {
                    seed: *seed,
                    instances: *count,
                    theorems: selected,
                    tol: instance::default_tolerance()?,
                    ..SuiteConfig::default()
                })?,
                (Some(path), None) => check_instance(&parse_instance(path)?, &selected)?,
                _ => {
                    return Err(CliError::Usage(
                        "check takes either an instance file or --instances, not both".into(),
                    ))
                }
            };
            let failed = reports.iter().any(|r| !r.passed);
            Ok(outcome("check", Payload::Checks(reports), failed))
        }
        Command::Bounds { instance, y, beta } => {
            let inst = parse_instance(&instance.instance)?;
            let report = match (y, beta) {
                (Some(y), None) => theorem5_bounds(&inst.utility, &inst.profile, *y, inst.tolerance)?,
                (None, Some(b)) => {
                    cross_welfare_ratio(&inst.utility, &parse_utility(b)?, &inst.profile, inst.tolerance)?
                }
                _ => return Err(CliError::Usage("bounds needs exactly one of --y or --beta".into())),
            };
            let failed = !report.valid_exact_form;
            Ok(outcome("bounds", Payload::Bounds(report), failed))
        }
        Command::Asymptote { instance, n_schedule } => {
            let inst = parse_instance(&instance.instance)?;
            let rows = n_schedule
                .iter()
                .map(|&n| asymptotic_exponent(&inst.utility, n))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(outcome("asymptote", Payload::Asymptotes(rows), false))
        }
        Command::Expected { instance, quadrature } => {
            let inst = parse_instance(&instance.instance)?;
            let dist = require_distribution(&inst)?;
            let c = expected_welfare(&inst.utility, dist, inst.profile.len(), inst.grid_points, *quadrature)?;
            Ok(outcome("expected", Payload::Expected(c), false))
        }
        Command::Converge {
            instance,
            y,
            n_schedule,
            replicates,
            seed,
        } => {
            let inst = parse_instance(&instance.instance)?;
            let dist = require_distribution(&inst)?;
            let seed = match (seed, &inst.agents) {
                (Some(s), _) => *s,
                (None, instance::Agents::Sampled { seed, .. }) => *seed,
                (None, instance::Agents::Explicit) => 0,
            };
            let r = lln_experiment(&inst.utility, dist, *y, n_schedule, *replicates, seed)?;
            Ok(outcome("converge", Payload::Convergence(r), false))
        }
    }
}

fn require_distribution(inst: &Instance) -> Result<&flight_core::stochastic::Distribution, CliError> {
    inst.distribution().ok_or_else(|| {
        CliError::Usage(format!(
            "{} lists explicit agents; this command needs a \"distribution\"",
            inst.path.display()
        ))
    })
}

/// Deterministic single-instance versions of the checks. Checks whose
/// preconditions the instance does not meet are reported on stderr and
/// left out.
fn check_instance(inst: &Instance, selected: &[Theorem]) -> Result<Vec<CheckReport>, CliError> {
    let (alpha, p, tol) = (&inst.utility, &inst.profile, inst.tolerance);
    // Shift by half the room on the roomier side.
    let (left_room, right_room) = (p.first(), 1.0 - p.last());
    let c = if right_room >= left_room { right_room / 2.0 } else { -left_room / 2.0 };
    let mut reports = Vec::new();
    let skip = |t: Theorem, why: String| eprintln!("theorem {} skipped: {why}", t.number());
    for &t in selected {
        match t {
            Theorem::Concavity => reports.push(check_concavity(alpha, p, inst.grid_points.max(101))?),
            Theorem::LocationInvariance => match check_location_invariance(alpha, p, c, tol) {
                Ok(r) => reports.push(r),
                Err(e @ flight_core::Error::SkippedCheck(_)) => skip(t, e.to_string()),
                Err(e) => return Err(e.into()),
            },
            Theorem::ShiftMonotonicity => {
                for (i, &x) in p.locations().iter().enumerate() {
                    if x > 0.0 {
                        reports.push(check_shift_monotonicity(alpha, p, i + 1, x / 2.0, tol)?);
                    }
                }
            }
            Theorem::MaxShift => reports.push(check_max_shift(alpha, p, &p.shifted(c)?, tol)?),
            Theorem::MedianPeak => match check_median_peak(alpha, p, tol) {
                Ok(r) => reports.push(r),
                Err(e @ flight_core::Error::Precondition(_)) => skip(t, e.to_string()),
                Err(e) => return Err(e.into()),
            },
        }
    }
    Ok(reports)
}

/// Runs a parsed command line end to end and returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let threads = cli.threads;
    let result = flight_core::par::with_threads(threads, || run(&cli.command));
    match result.and_then(|o| {
        emit_report(&o.report, cli.format, cli.out.as_deref())?;
        Ok(o.failed)
    }) {
        Ok(false) => EXIT_OK,
        Ok(true) => EXIT_FAILED_CHECK,
        Err(e) => {
            eprintln!("flight: {e}");
            EXIT_INPUT
        }
    }
}
