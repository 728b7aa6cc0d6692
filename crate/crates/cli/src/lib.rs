//! Command-line front end: loads a problem config, runs one of the solvers or
//! checks, and writes CSV and JSON results to an output directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use tangent_eq::discrete::invariance_audit;
use tangent_eq::equilibrium::{
    resolvent_iterate, truncation_iterate, viability_simulate, Constraint, SolveReport, SolveStatus,
};
use tangent_eq::io::{grid_function_csv, residuals_csv};
use tangent_eq::miranda::{miranda_solve, MirandaError, MirandaStatus};
use tangent_eq::problems::{check_conditions, MirandaProblem, ProblemConfig, ProblemSpec, SolveMethod};

/// Environment variable consulted for the output directory when `--out` is
/// not given.
pub const OUT_ENV: &str = "TANGENT_EQ_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tangent-eq", version, about = "Constrained equilibria of reaction-diffusion inclusions")]
struct Cli {
    /// Output directory (overrides TANGENT_EQ_OUT and the config's [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solve even when a hypothesis check fails.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find a constrained equilibrium.
    Solve { config: PathBuf },
    /// Locate a zero of the configured map in the configured cube.
    Miranda { config: PathBuf },
    /// Audit that resolvents keep the constraint set invariant.
    CheckInvariance { config: PathBuf },
    /// Run every hypothesis check for the problem kind.
    CheckConditions { config: PathBuf },
    /// Run the time-stepping viability simulation.
    Simulate { config: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Miranda { .. } => "miranda",
            Command::CheckInvariance { .. } => "check-invariance",
            Command::CheckConditions { .. } => "check-conditions",
            Command::Simulate { .. } => "simulate",
        }
    }

    fn config(&self) -> &Path {
        match self {
            Command::Solve { config }
            | Command::Miranda { config }
            | Command::CheckInvariance { config }
            | Command::CheckConditions { config }
            | Command::Simulate { config } => config,
        }
    }
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, message: e.to_string() }
}

/// Exit code for a solver status.
pub fn status_exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::TangencyFailure | SolveStatus::LocalizationFailed => EXIT_HYPOTHESIS,
        SolveStatus::NonConvergence | SolveStatus::MaxIter => EXIT_NONCONVERGENCE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("tangent-eq {}: {}", cli.command.name(), f.message);
            f.code
        }
    }
}

struct Context {
    cfg: ProblemConfig,
    config_dir: PathBuf,
    config_name: String,
    out: PathBuf,
}

fn output_dir(cli: &Cli, cfg: &ProblemConfig, config_dir: &Path) -> PathBuf {
    if let Some(out) = &cli.out {
        return out.clone();
    }
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    match &cfg.output.dir {
        Some(dir) => config_dir.join(dir),
        None => PathBuf::from("out"),
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let path = cli.command.config();
    let cfg = ProblemConfig::load(path).map_err(usage)?;
    let config_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let config_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let out = output_dir(cli, &cfg, &config_dir);
    let ctx = Context { cfg, config_dir, config_name, out };
    match &cli.command {
        Command::Miranda { .. } => miranda(&ctx),
        command => {
            let mut spec = ProblemSpec::from_config(&ctx.cfg, &ctx.config_dir).map_err(usage)?;
            if let Some(seed) = cli.seed {
                spec = spec.with_seed(seed);
            }
            match command {
                Command::Solve { .. } => solve(cli, &ctx, &spec),
                Command::CheckInvariance { .. } => check_invariance(&ctx, &spec),
                Command::CheckConditions { .. } => conditions(&ctx, &spec),
                Command::Simulate { .. } => simulate(&ctx, &spec),
                Command::Miranda { .. } => unreachable!(),
            }
        }
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn write_json(out: &Path, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(usage)?;
    text.push('\n');
    write(out, "report.json", &text)
}

fn header(ctx: &Context, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config".into(), json!(ctx.config_name));
    m
}

fn solve(cli: &Cli, ctx: &Context, spec: &ProblemSpec) -> Result<i32, Failure> {
    let mut report = header(ctx, "solve");
    report.insert("kind".into(), json!(spec.kind.as_str()));
    let conditions = check_conditions(spec);
    report.insert("condition_report".into(), serde_json::to_value(&conditions).map_err(usage)?);
    if !conditions.passed && !cli.force {
        report.insert("status".into(), json!("HypothesisFailure"));
        write_json(&ctx.out, &Value::Object(report))?;
        let failed: Vec<&str> = conditions.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        eprintln!("hypothesis check failed ({}); rerun with --force to solve anyway", failed.join(", "));
        return Ok(EXIT_HYPOTHESIS);
    }
    let op = spec.assemble().map_err(usage)?;
    let result: SolveReport = match (spec.method, &spec.constraint) {
        (SolveMethod::Truncation, Constraint::Moving(walls)) => {
            truncation_iterate(&op, &spec.field, walls, &spec.solver)
        }
        _ => resolvent_iterate(&op, &spec.field, &spec.constraint, &spec.initial_state(), &spec.solver),
    }
    .map_err(usage)?;
    report.insert(
        "method".into(),
        json!(if spec.method == SolveMethod::Truncation { "truncation" } else { "resolvent" }),
    );
    if let Value::Object(fields) = serde_json::to_value(&result).map_err(usage)? {
        report.extend(fields);
    }
    write(&ctx.out, "u_star.csv", &grid_function_csv(&spec.grid, &result.u_star))?;
    write(&ctx.out, "residuals.csv", &residuals_csv(&result.residual_history))?;
    write_json(&ctx.out, &Value::Object(report))?;
    println!(
        "{}: {} after {} iterations, residual {:.3e}",
        ctx.config_name,
        result.status.as_str(),
        result.iterations,
        result.equation_residual
    );
    Ok(status_exit_code(result.status))
}

fn check_invariance(ctx: &Context, spec: &ProblemSpec) -> Result<i32, Failure> {
    let Constraint::Uniform(body) = &spec.constraint else {
        return Err(usage("check-invariance needs a fixed constraint set, not moving walls"));
    };
    let op = spec.assemble().map_err(usage)?;
    let audit = invariance_audit(&op, body, &spec.audit.steps, spec.audit.samples, spec.audit.seed).map_err(usage)?;
    let mut report = header(ctx, "check-invariance");
    report.insert("passed".into(), json!(audit.passed));
    report.insert("audit".into(), serde_json::to_value(&audit).map_err(usage)?);
    write_json(&ctx.out, &Value::Object(report))?;
    println!(
        "{}: invariance {} (worst overshoot {:.3e})",
        ctx.config_name,
        if audit.passed { "holds" } else { "FAILS" },
        audit.worst_overshoot
    );
    Ok(if audit.passed { EXIT_OK } else { EXIT_HYPOTHESIS })
}

fn conditions(ctx: &Context, spec: &ProblemSpec) -> Result<i32, Failure> {
    let conditions = check_conditions(spec);
    let mut report = header(ctx, "check-conditions");
    report.insert("kind".into(), json!(spec.kind.as_str()));
    report.insert("passed".into(), json!(conditions.passed));
    report.insert("condition_report".into(), serde_json::to_value(&conditions).map_err(usage)?);
    write_json(&ctx.out, &Value::Object(report))?;
    for c in &conditions.checks {
        println!(
            "{:<24} {} (worst margin {:.3e}, {} samples)",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.worst_margin,
            c.samples
        );
    }
    Ok(if conditions.passed { EXIT_OK } else { EXIT_HYPOTHESIS })
}

fn simulate(ctx: &Context, spec: &ProblemSpec) -> Result<i32, Failure> {
    let op = spec.assemble().map_err(usage)?;
    let sim = viability_simulate(
        &op,
        &spec.field,
        &spec.constraint,
        &spec.initial_state(),
        spec.simulate.t_end,
        spec.simulate.h,
    )
    .map_err(usage)?;
    let mut report = header(ctx, "simulate");
    if let Value::Object(fields) = serde_json::to_value(&sim).map_err(usage)? {
        report.extend(fields);
    }
    write(&ctx.out, "u_star.csv", &grid_function_csv(&spec.grid, &sim.final_state))?;
    write(&ctx.out, "residuals.csv", &residuals_csv(&sim.distance_history))?;
    write_json(&ctx.out, &Value::Object(report))?;
    println!("{}: {} steps, max distance to the constraint {:.3e}", ctx.config_name, sim.steps, sim.max_distance);
    Ok(if sim.tangency_failure.is_some() { EXIT_HYPOTHESIS } else { EXIT_OK })
}

fn miranda(ctx: &Context) -> Result<i32, Failure> {
    let problem = MirandaProblem::from_config(&ctx.cfg).map_err(usage)?;
    let f = |x: &[f64]| problem.map.eval(x);
    let mut report = header(ctx, "miranda");
    let code = match miranda_solve(&f, &problem.cube, &problem.options) {
        Ok(sol) => {
            println!("{}: zero {:?}, |f| = {:.3e}", ctx.config_name, sol.zero, sol.residual);
            if let Value::Object(fields) = serde_json::to_value(&sol).map_err(usage)? {
                report.extend(fields);
            }
            if sol.status == MirandaStatus::Converged {
                EXIT_OK
            } else {
                EXIT_NONCONVERGENCE
            }
        }
        Err(MirandaError::CertificateFailed(cert)) => {
            report.insert("status".into(), json!("certificate_failed"));
            report.insert("certificate".into(), serde_json::to_value(&cert).map_err(usage)?);
            eprintln!("sign certificate fails on the initial cube");
            EXIT_HYPOTHESIS
        }
        Err(e) => return Err(usage(e)),
    };
    write_json(&ctx.out, &Value::Object(report))?;
    Ok(code)
}
