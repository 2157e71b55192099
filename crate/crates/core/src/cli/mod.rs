//! Command-line front end: config parsing, subcommand dispatch and report files.

mod config;
mod report;

pub use config::{BasisConfig, BasisKind, Config, DomainName, NonlinearConfig, Tolerances};
pub use report::{
    Check, ExplicitCheck, LoadCheck, Provenance, Report, ReportBody, Table, DECOMPOSITION_COLUMNS, STUDY_COLUMNS,
    TOOL, W2_COLUMNS,
};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::limit::{
    explicit_residuals, gap_report, min_limit, min_linear, nonuniqueness_check, rotated_no_gap_check,
    ExplicitSolution,
};
use crate::loads::{compatibility_report, reversed_compatibility_witness, LoadEvaluator};
use crate::math3::Mat3;
use crate::nonlinear::convergence_study;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

const AFTER_HELP: &str = "\
Outputs (in --out, default the current directory):
  report.json   provenance, resolved config with tolerances, result, checks
  report.csv    check-loads, kernel: a,b,c,w2_work
                  (skew generator W(a,b,c) and the work L(W^2 x))
                gap-report: theta,value,predicted,residual
                  (limit minimum at fixed angle vs cos^2*min E + sin^2*min G~)
                nonlinear-study: h,value_Gh,gap_to_limit,rot_dist,strain_rescaled
                  (failed rows are NaN)
  timing.json   wall time in seconds

Exit codes: 0 success, 1 usage, 2 invalid config or unsupported input,
3 solver failure or incompatible loads, 4 a certification check failed.";

#[derive(Debug, Parser)]
#[command(name = "traction-gap", version, about = "Energy gap for pure-traction elasticity", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Io {
    /// JSON config; `{}` selects the cylinder preset.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compatibility conditions, kernel class and a reversed witness.
    CheckLoads(Io),
    /// Rotation kernel classification.
    Kernel(Io),
    /// Minimum of the linearized energy.
    SolveLinear(Io),
    /// Minimum of the limit energy over the rotation kernel.
    SolveLimit(Io),
    /// Closed-form and Galerkin gap, decomposition table, incompressible bounds.
    GapReport(Io),
    /// Residuals of the closed-form cylinder solution.
    VerifyExplicit(Io),
    /// Scaled nonlinear minima along the h schedule.
    NonlinearStudy(Io),
    /// Gap under loads rotated by the optimal rotation.
    RotatedCheck(Io),
    /// Mirror minimizer of the limit energy.
    Nonuniqueness(Io),
}

impl Command {
    fn io(&self) -> &Io {
        match self {
            Self::CheckLoads(io)
            | Self::Kernel(io)
            | Self::SolveLinear(io)
            | Self::SolveLimit(io)
            | Self::GapReport(io)
            | Self::VerifyExplicit(io)
            | Self::NonlinearStudy(io)
            | Self::RotatedCheck(io)
            | Self::Nonuniqueness(io) => io,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Unsupported(_) => EXIT_VALIDATION,
        _ => EXIT_SOLVER,
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_SUCCESS,
                _ => EXIT_USAGE,
            };
        }
    };
    let io = cli.command.io();
    let bytes = match std::fs::read(&io.config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", io.config.display());
            return EXIT_VALIDATION;
        }
    };
    let config = match std::str::from_utf8(&bytes).map_err(|e| Error::invalid(e.to_string())).and_then(Config::from_json)
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };

    let start = Instant::now();
    let (body, checks) = match execute(&cli.command, &config) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let report = Report::new(Provenance::new(&bytes, config.seed), config, body, checks);
    if let Err(e) = write_outputs(&report, &io.out, wall) {
        eprintln!("error: {e}");
        return EXIT_SOLVER;
    }
    for c in &report.checks {
        let rel = if c.lower_bound { ">" } else { "<" };
        let verdict = if c.passed { "ok" } else { "FAILED" };
        println!("{:<32} {:>14.6e} {rel} {:<10.3e} {verdict}", c.name, c.value, c.threshold);
    }
    println!("report written to {}", io.out.join("report.json").display());
    if report.certified {
        EXIT_SUCCESS
    } else {
        EXIT_CERTIFICATION
    }
}

fn write_outputs(report: &Report, out: &Path, wall: f64) -> Result<()> {
    let io = |e: std::io::Error| Error::invalid(format!("writing to {}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    std::fs::write(out.join("report.json"), report.to_json()?).map_err(io)?;
    if let Some(table) = report.table() {
        table.write(&out.join("report.csv"))?;
    }
    let timing = serde_json::json!({ "wall_time_seconds": wall });
    std::fs::write(out.join("timing.json"), format!("{timing}\n")).map_err(io)?;
    Ok(())
}

/// Runs a subcommand on a validated config.
fn execute(command: &Command, config: &Config) -> Result<(ReportBody, Vec<Check>)> {
    let spec = config.load_spec()?;
    let limit_options = config.limit_options();
    let tol = &config.tolerances;
    Ok(match command {
        Command::CheckLoads(_) => {
            let ko = config.kernel_options();
            let kernel = compatibility_report(&spec, &ko)?;
            let reversed_witness = reversed_compatibility_witness(&spec, &ko)?;
            let witness_work = match &reversed_witness {
                Some(r) => Some(LoadEvaluator::new(&spec, ko.quadrature_order)?.rotation_work(r)),
                None => None,
            };
            let profile = spec.builtin.is_none().then(|| spec.profile_constraints());
            (ReportBody::CheckLoads(LoadCheck { profile, kernel, reversed_witness, witness_work }), vec![])
        }
        Command::Kernel(_) => (ReportBody::Kernel(compatibility_report(&spec, &config.kernel_options())?), vec![]),
        Command::SolveLinear(_) => {
            (ReportBody::SolveLinear(min_linear(&spec, config.incompressible, &limit_options)?), vec![])
        }
        Command::SolveLimit(_) => {
            (ReportBody::SolveLimit(min_limit(&spec, config.incompressible, &limit_options)?), vec![])
        }
        Command::GapReport(_) => {
            let g = gap_report(&spec, &limit_options)?;
            let scale = g.min_linear.abs();
            let worst = g.decomposition_table.iter().map(|r| r.residual).fold(0.0, f64::max);
            let mut checks = vec![
                Check::above("margin", g.margin, 0.0),
                Check::above("relative_margin", g.relative_margin, tol.relative_margin),
                Check::above("incompressible_separation", g.incompressible.min_linear_lower - g.incompressible.min_limit_upper, 0.0),
            ];
            if !g.decomposition_table.is_empty() {
                checks.push(Check::below("decomposition_residual", worst, tol.decomposition * scale));
            }
            (ReportBody::GapReport(Box::new(g)), checks)
        }
        Command::VerifyExplicit(_) => {
            let sol = ExplicitSolution::new(&spec)?;
            let residuals = explicit_residuals(&sol, &spec, config.quadrature_order)?;
            let profile = spec.profile_constraints();
            let checks = vec![
                Check::below("profile_constraints", profile.radial_defect(), tol.profile),
                Check::below("ode_residual", residuals.ode, tol.ode),
                Check::below("euler_lagrange_interior", residuals.euler_lagrange_interior, tol.euler_lagrange),
                Check::below("euler_lagrange_boundary", residuals.euler_lagrange_boundary, tol.euler_lagrange),
                Check::below("biharmonic_residual", residuals.biharmonic, tol.biharmonic),
                Check::below("planar_orthogonality", residuals.planar_orthogonality.abs(), tol.orthogonality),
                Check::below(
                    "orthogonality_minus_axial_energy",
                    (residuals.orthogonality - residuals.axial_energy).abs(),
                    tol.orthogonality,
                ),
            ];
            let body = ExplicitCheck { profile, eta: sol.eta.clone(), psi_potential: sol.axial.clone(), residuals };
            (ReportBody::VerifyExplicit(body), checks)
        }
        Command::NonlinearStudy(_) => {
            let study = convergence_study(&spec, &config.h_schedule, &config.nonlinear_options(), &limit_options)?;
            let checks = study_checks(&study, tol);
            (ReportBody::NonlinearStudy(study), checks)
        }
        Command::RotatedCheck(_) => {
            let r = rotated_no_gap_check(&spec, None, &limit_options)?;
            let checks = vec![Check::below("rotated_relative_difference", r.relative_difference, tol.rotated)];
            (ReportBody::RotatedCheck(r), checks)
        }
        Command::Nonuniqueness(_) => {
            let n = nonuniqueness_check(&spec, &limit_options)?;
            let checks = vec![
                Check::below("value_relative_difference", n.relative_difference, tol.nonuniqueness_value),
                Check::above("strain_separation", n.strain_difference / n.strain_norm, tol.nonuniqueness_strain),
            ];
            (ReportBody::Nonuniqueness(n), checks)
        }
    })
}

fn study_checks(study: &crate::nonlinear::ConvergenceStudy, tol: &Tolerances) -> Vec<Check> {
    let rows = &study.rows;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let mut checks = vec![Check::below("failed_rows", failed as f64, 1.0)];
    // largest ratio of consecutive gaps; < 1 means strictly decreasing
    let worst_ratio = rows.windows(2).map(|w| w[1].gap_to_limit / w[0].gap_to_limit).fold(0.0, |a: f64, b| {
        if b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    });
    if rows.len() > 1 {
        checks.push(Check::below("gap_ratio_max", worst_ratio, 1.0));
    }
    if let Some(last) = rows.last() {
        let scale = study.limit_value.abs();
        let rel = if scale > 0.0 { last.gap_to_limit / scale } else { last.gap_to_limit };
        checks.push(Check::below("final_relative_gap", rel, tol.study_final_gap));
    }
    // strain growth is only expected when the limit rotation is not the identity
    if rows.len() > 1 && (study.limit_rotation - Mat3::identity()).norm() > 1e-6 {
        let growth = rows[rows.len() - 1].rescaled_strain / rows[0].rescaled_strain;
        checks.push(Check::above("strain_growth", growth, tol.study_strain_growth));
    }
    checks
}
