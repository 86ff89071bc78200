//! Command-line front end: assembles operators from JSON run descriptions,
//! applies fractional powers, samples half-space extensions, and runs the
//! named verification suites, writing a deterministic `report.json` plus CSV
//! artifacts into the chosen output directory.
//!
//! Exit codes: 0 when every check passes, 1 when at least one check fails,
//! and 2 for configuration or I/O problems (malformed run descriptions,
//! out-of-range powers, unwritable output directories).

mod ingest;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use report::{Report, Status};
use suites::Suite;

#[derive(Parser)]
#[command(
    name = "fracext",
    version,
    about = "Fractional powers of assembled elliptic operators, their half-space extensions, and structure checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the operator described by a run description and export it.
    Assemble(CommonArgs),
    /// Apply the sigma-th operator power through independent routes.
    Fracpow(CommonArgs),
    /// Sample the half-space extension profile and test its equation.
    Extend(CommonArgs),
    /// Run one named verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run description.
    #[arg(long)]
    spec: PathBuf,
    /// Fractional power of the assembled operator.
    #[arg(long)]
    sigma: Option<f64>,
    /// Output directory for report.json and CSV artifacts
    /// (the FRACEXT_OUT environment variable takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed driving every randomized probe.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Caps the number of worker threads; never changes results.
    #[arg(long)]
    threads: Option<usize>,
    /// Tolerance override as name=value; repeatable.
    #[arg(long = "tol", value_parser = parse_tol, action = clap::ArgAction::Append)]
    tol: Vec<(String, f64)>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which check family to run.
    #[arg(long, value_enum)]
    suite: Suite,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s}"))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad numeric value in {s}: {e}"))?;
    Ok((name.trim().to_string(), v))
}

fn status_word(status: Status) -> &'static str {
    match status {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::NotApplicable => "n/a ",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    let (command_name, common, suite): (&str, &CommonArgs, Option<Suite>) = match &cli.command {
        Command::Assemble(c) => ("assemble", c, None),
        Command::Fracpow(c) => ("fracpow", c, None),
        Command::Extend(c) => ("extend", c, None),
        Command::Verify(v) => ("verify", &v.common, Some(v.suite)),
    };

    if let Some(t) = common.threads {
        if t == 0 {
            return Err("--threads must be at least 1".into());
        }
        // caps the linear-algebra worker pool before any backend call;
        // thread count never changes numerical results
        std::env::set_var("OPENBLAS_NUM_THREADS", t.to_string());
        std::env::set_var("OMP_NUM_THREADS", t.to_string());
    }

    let out_dir = std::env::var_os("FRACEXT_OUT")
        .map(PathBuf::from)
        .or_else(|| common.out.clone())
        .unwrap_or_else(|| PathBuf::from("fracext-out"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", out_dir.display()))?;

    let defaults = match suite {
        Some(s) => suites::suite_defaults(s),
        None if command_name == "assemble" => suites::ASSEMBLE_DEFAULTS,
        None if command_name == "fracpow" => suites::FRACPOW_DEFAULTS,
        None => suites::EXTEND_DEFAULTS,
    };
    let tols = report::resolve_tolerances(defaults, &common.tol)?;

    let (raw, spec) = ingest::load_spec_file(&common.spec).map_err(|e| e.to_string())?;
    let ctx = suites::RunCtx {
        raw: &raw,
        spec: &spec,
        sigma: common.sigma,
        seed: common.seed,
        tols: &tols,
        out_dir: &out_dir,
    };

    let start = std::time::Instant::now();
    let outcome = match suite {
        Some(s) => suites::run_suite(s, &ctx)?,
        None if command_name == "assemble" => suites::run_assemble(&ctx)?,
        None if command_name == "fracpow" => suites::run_fracpow(&ctx)?,
        None => suites::run_extend(&ctx)?,
    };
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut rep = Report::new(
        command_name,
        suite.map(|s| s.name()),
        &common.spec,
        common.sigma,
        common.seed,
    );
    rep.tolerances = tols;
    for check in outcome.checks {
        rep.push(check);
    }
    rep.artifacts = outcome.artifacts;
    rep.timings.total_ms = elapsed_ms;
    rep.timings.checks_ms.insert("run".into(), elapsed_ms);

    let path = rep
        .write(&out_dir)
        .map_err(|e| format!("cannot write report into {}: {e}", out_dir.display()))?;

    for check in &rep.checks {
        println!("{} {}", status_word(check.status), check.name);
    }
    println!("report: {}", path.display());
    Ok(rep.passed)
}
