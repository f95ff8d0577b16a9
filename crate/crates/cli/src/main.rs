//! Config-driven front end: audit, transform, phi, solve, pipeline and
//! sweep runs over the singular quasi-linear laboratory.
//!
//! Exit codes: 0 success, 1 domain or verdict failure, 2 usage or parse
//! failure.

mod config;
mod manifest;
mod runner;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{extract, RawConfig, RunSpec};
use manifest::Manifest;

#[derive(Parser)]
#[command(name = "quasilin", version, about = "Singular quasi-linear elliptic laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (sectioned key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.dir` from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Parallel jobs for sweeps (default: all cores; 1 forces sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Declares the run seed-free; every computation here is
    /// deterministic and no RNG exists, so this flag is accepted and has
    /// no effect.
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the coefficient assumptions; exit 0 iff all pass.
    Audit,
    /// Build the substitution tables and limit checks.
    Transform,
    /// Build the boundary profile and its amplitude table.
    Phi,
    /// Solve the reduced problem and reconstruct the original unknown.
    Solve,
    /// Audit, transform, profile, solve and analyze in one run.
    Pipeline,
    /// Expand value lists into a run per combination (cap 256).
    Sweep,
}

const EXIT_DOMAIN: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn load_spec(cli: &Cli) -> Result<(RawConfig, RunSpec), (u8, String)> {
    let path = cli
        .config
        .as_ref()
        .ok_or((EXIT_USAGE, "--config PATH is required".to_string()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| (EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    let raw = RawConfig::parse(&text).map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
    let mut spec = extract(&raw).map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
    if let Some(out) = &cli.out {
        spec.out_dir = out.clone();
    }
    Ok((raw, spec))
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("quasilin: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Audit => {
            let (_, spec) = load_spec(cli)?;
            with_dir(&spec, |dir, man| runner::run_audit(&spec, dir, man).map(|_| ()))
        }
        Command::Transform => {
            let (_, spec) = load_spec(cli)?;
            with_dir(&spec, |dir, man| {
                runner::run_audit(&spec, dir, man)?;
                let pack = runner::build_pack(&spec)?;
                let limits = runner::emit_transform(&pack, dir, man, true)?;
                emit_json(dir, man, "limits.json", &limits)
            })
        }
        Command::Phi => {
            let (_, spec) = load_spec(cli)?;
            with_dir(&spec, |dir, man| {
                runner::run_audit(&spec, dir, man)?;
                let pack = runner::build_pack(&spec)?;
                let (_, section) = runner::emit_profile(&pack, &spec, dir, man, true)?;
                emit_json(dir, man, "amplitudes.json", &section)
            })
        }
        Command::Solve => {
            let (_, spec) = load_spec(cli)?;
            with_dir(&spec, |dir, man| {
                runner::run_audit(&spec, dir, man)?;
                let pack = runner::build_pack(&spec)?;
                let (_, summary, _) = runner::run_solve(&pack, &spec, dir, man, true)?;
                emit_json(dir, man, "solve.json", &summary)
            })
        }
        Command::Pipeline => {
            let (_, spec) = load_spec(cli)?;
            runner::run_pipeline(&spec, &spec.out_dir.clone())
                .map_err(|e| (EXIT_DOMAIN, e.to_string()))
        }
        Command::Sweep => {
            let (raw, base_spec) = load_sweep_base(cli)?;
            run_sweep(cli, &raw, &base_spec)
        }
    }
}

/// Sweep configs fail single-run extraction when they hold lists, so the
/// base is extracted from the first expanded run.
fn load_sweep_base(cli: &Cli) -> Result<(RawConfig, RunSpec), (u8, String)> {
    let path = cli
        .config
        .as_ref()
        .ok_or((EXIT_USAGE, "--config PATH is required".to_string()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| (EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    let raw = RawConfig::parse(&text).map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
    let runs = raw
        .expand_sweep()
        .map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
    let mut spec = extract(&runs[0]).map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
    if let Some(out) = &cli.out {
        spec.out_dir = out.clone();
    }
    Ok((raw, spec))
}

#[derive(Serialize)]
struct SweepIndexEntry {
    dir: String,
    mu: f64,
    gamma: f64,
    s0: f64,
    n: usize,
    q: f64,
    ell: f64,
    status: String,
}

fn run_sweep(cli: &Cli, raw: &RawConfig, base: &RunSpec) -> Result<(), (u8, String)> {
    let runs = raw
        .expand_sweep()
        .map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
    let mut specs = Vec::with_capacity(runs.len());
    for (k, run) in runs.iter().enumerate() {
        let mut spec = extract(run).map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
        spec.out_dir = base.out_dir.join(format!("run_{k:03}"));
        specs.push(spec);
    }
    let statuses: Vec<Option<String>> = quasilin::batch::map_batch(&specs, cli.jobs, |spec| {
        runner::run_pipeline(spec, &spec.out_dir).err().map(|e| e.to_string())
    });
    // summary index written single-threaded at the end
    let entries: Vec<SweepIndexEntry> = specs
        .iter()
        .zip(&statuses)
        .enumerate()
        .map(|(k, (spec, status))| SweepIndexEntry {
            dir: format!("run_{k:03}"),
            mu: spec.family.mu,
            gamma: spec.family.gamma,
            s0: spec.family.s0,
            n: spec.mesh_n,
            q: spec.mesh_q,
            ell: spec.profile_ell,
            status: status.clone().unwrap_or_else(|| "ok".to_string()),
        })
        .collect();
    fs::create_dir_all(&base.out_dir)
        .map_err(|e| (EXIT_DOMAIN, format!("cannot create output dir: {e}")))?;
    let json = serde_json::to_vec_pretty(&entries)
        .map_err(|e| (EXIT_DOMAIN, format!("index: {e}")))?;
    fs::write(base.out_dir.join("index.json"), json)
        .map_err(|e| (EXIT_DOMAIN, format!("index: {e}")))?;
    if let Some(first_bad) = statuses.iter().flatten().next() {
        return Err((EXIT_DOMAIN, format!("sweep had failures: {first_bad}")));
    }
    Ok(())
}

fn with_dir(
    spec: &RunSpec,
    body: impl FnOnce(&std::path::Path, &mut Manifest) -> Result<(), runner::StageError>,
) -> Result<(), (u8, String)> {
    fs::create_dir_all(&spec.out_dir)
        .map_err(|e| (EXIT_DOMAIN, format!("cannot create output dir: {e}")))?;
    let mut man = Manifest::default();
    let outcome = body(&spec.out_dir, &mut man);
    if let Err(e) = &outcome {
        man.stage_failed(e.stage, &e.message);
    }
    let _ = man.write(&spec.out_dir);
    outcome.map_err(|e| (EXIT_DOMAIN, e.to_string()))
}

fn emit_json<T: Serialize>(
    dir: &std::path::Path,
    man: &mut Manifest,
    name: &str,
    value: &T,
) -> Result<(), runner::StageError> {
    let json = serde_json::to_vec_pretty(value).map_err(|e| runner::StageError {
        stage: "emit",
        message: e.to_string(),
    })?;
    man.emit(dir, name, &json).map_err(|e| runner::StageError {
        stage: "emit",
        message: e.to_string(),
    })
}
