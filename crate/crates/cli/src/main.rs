//! Batch front-end: parses a TOML config, orchestrates sweeps and
//! stochastic ensembles, and writes CSV artifacts plus a JSON manifest per
//! task.

mod config;
mod output;
mod tasks;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use config::Config;
use output::{sha256_hex, write_config_echo, Manifest};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Exit status 2: configuration problems.
const EXIT_CONFIG: u8 = 2;
/// Exit status 3: numerical failure (non-finite states, no convergence).
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "dtc", version, about = "Driven dissipative spin-cavity simulation toolkit")]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// TOML config file; omit to run from built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. --set model.delta=0.2
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Force deterministic outputs (on by default; kept as an explicit
    /// switch for scripting).
    #[arg(long)]
    reproducible: bool,
}

#[derive(Subcommand)]
enum Task {
    /// Mean-field trajectory on the converged attractor, probe off/on.
    Trace(CommonArgs),
    /// Attractor search at the configured parameters.
    Attractor(CommonArgs),
    /// Floquet exponents over an (omega, g1/g0) grid.
    FloquetSweep(CommonArgs),
    /// Stochastic probe-response map over (omega, omega_pr).
    ProbeMap(CommonArgs),
    /// Stochastic vertical cut with a Floquet-parameterized Lorentzian fit.
    Lineshape(CommonArgs),
    /// Normal-phase spectrum vs the analytic Bogoliubov frequency.
    NpSpectrum(CommonArgs),
    /// Probe-phase scan over (phi, omega_pr) at fixed omega.
    PhaseScan(CommonArgs),
    /// Hysteresis scan (up and down) over the omega grid.
    Hysteresis(CommonArgs),
    /// Check the configuration and report regime warnings.
    Validate(CommonArgs),
}

impl Task {
    fn name(&self) -> &'static str {
        match self {
            Task::Trace(_) => "trace",
            Task::Attractor(_) => "attractor",
            Task::FloquetSweep(_) => "floquet_sweep",
            Task::ProbeMap(_) => "probe_map",
            Task::Lineshape(_) => "lineshape",
            Task::NpSpectrum(_) => "np_spectrum",
            Task::PhaseScan(_) => "phase_scan",
            Task::Hysteresis(_) => "hysteresis",
            Task::Validate(_) => "validate",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Task::Trace(a)
            | Task::Attractor(a)
            | Task::FloquetSweep(a)
            | Task::ProbeMap(a)
            | Task::Lineshape(a)
            | Task::NpSpectrum(a)
            | Task::PhaseScan(a)
            | Task::Hysteresis(a)
            | Task::Validate(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Configuration problems exit 2, numerical ones 3.
            let chain = format!("{e:#}");
            if chain.contains("non-finite")
                || chain.contains("not stabilized")
                || chain.contains("finite range")
            {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let args = cli.task.args();
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = Config::from_toml_with_overrides(&text, &args.sets)?;
    if let Some(w) = args.workers {
        cfg.run.workers = w;
    }
    if let Some(s) = args.seed {
        cfg.ensemble.seed = Some(s);
    }
    if let Some(out) = &args.out {
        cfg.run.output_dir = out.display().to_string();
    }
    if args.reproducible {
        cfg.run.reproducible = true;
    }
    let resolved = cfg.resolve()?;

    if cfg.run.workers > 0 {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build_global();
    }

    let mut warnings: Vec<String> = tasks::run_validate(&resolved)?;
    if let Task::Validate(_) = cli.task {
        if warnings.is_empty() {
            println!("configuration ok, no regime warnings");
        } else {
            for w in &warnings {
                println!("warning: {w}");
            }
        }
        return Ok(ExitCode::SUCCESS);
    }

    let dir = PathBuf::from(&cfg.run.output_dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let config_echo = toml::to_string(&resolved.config)?;
    // Hash only result-relevant configuration: the output location and
    // thread count never change the numbers.
    let hash = {
        let mut for_hash = resolved.config.clone();
        for_hash.run = config::RunSection::default();
        sha256_hex(&toml::to_string(&for_hash)?)
    };

    let started = Instant::now();
    let mut out = match &cli.task {
        Task::Trace(_) => tasks::run_trace(&resolved, &dir, &hash)?,
        Task::Attractor(_) => tasks::run_attractor(&resolved, &dir, &hash)?,
        Task::FloquetSweep(_) => tasks::run_floquet_sweep(&resolved, &dir, &hash)?,
        Task::ProbeMap(_) => tasks::run_probe_map(&resolved, &dir, &hash)?,
        Task::Lineshape(_) => tasks::run_lineshape(&resolved, &dir, &hash)?,
        Task::NpSpectrum(_) => tasks::run_np_spectrum(&resolved, &dir, &hash)?,
        Task::PhaseScan(_) => tasks::run_phase_scan(&resolved, &dir, &hash)?,
        Task::Hysteresis(_) => tasks::run_hysteresis(&resolved, &dir, &hash)?,
        Task::Validate(_) => unreachable!(),
    };
    let wall = started.elapsed().as_secs_f64();

    let echo_path = write_config_echo(&dir, &config_echo)?;
    out.artifacts.push(echo_path);
    warnings.append(&mut out.warnings);

    let manifest = Manifest {
        task: cli.task.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: hash,
        seed: resolved.ensemble.seed,
        reproducible: cfg.run.reproducible,
        workers: cfg.run.workers,
        wall_time_s: wall,
        artifacts: out
            .artifacts
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        warnings: warnings.clone(),
        summary: out.summary,
    };
    let manifest_path = manifest.write(&dir)?;

    println!("task {} finished in {wall:.2} s", cli.task.name());
    for a in &manifest.artifacts {
        println!("  wrote {}", dir.join(a).display());
    }
    println!("  wrote {}", manifest_path.display());
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}
