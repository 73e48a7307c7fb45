//! Configuration, command dispatch and report emission for `ctrace`.
//!
//! Exit codes: 0 ok, 1 comparison or check failure, 2 computation failure,
//! 64 usage or configuration error.

mod check;
mod commands;
pub mod config;

pub use check::{cmd_check, CheckReport, CheckResult};
pub use commands::{
    cmd_compare, cmd_orbits, cmd_predict, cmd_quantum, power_fit, spectra_for, ComparisonReport, CompareRow,
    Context, CylinderFit, CylinderSlot, OrbitRecord, OrbitSet, OrbitsReport, PoissonResult,
};
pub use config::RunConfig;

use crate::error::Error;
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "ctrace", version, about = "Closed orbits and trace amplitudes for conormal potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides `output.workers`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Validate the configuration and print the plan without computing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Length spectrum and orbit cylinders: orbits.json, spectrum.csv.
    Orbits,
    /// Semiclassical trace prediction: predictions.csv.
    Predict,
    /// Quantum smoothed density: quantum_trace.csv and the spectrum cache.
    Quantum,
    /// Prediction against the quantum oracle: report.json.
    Compare,
    /// Invariant suite on the built-in fleet: check.json.
    Check,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_COMPUTATION,
    }
}

fn plan(cmd: Command, cfg: &RunConfig, ctx: &Context, workers: usize) -> String {
    let w = &cfg.window;
    let mut s = format!(
        "command: {cmd:?}\nmodel: {} (k0 = {})\nenergy window: {:?} at {} width {}\ntime window: {:?} at {} width {}\nh: {:?}\nenergies: {:?}\nl_max: {}\nn_max: {}\nworkers: {workers}\noutput: {}\n",
        cfg.model.name,
        cfg.model.k0,
        w.energy_profile,
        w.energy_center,
        w.energy_width,
        w.time_profile,
        w.time_center,
        w.time_width,
        cfg.run.h,
        cfg.energies(),
        cfg.l_max(),
        cfg.run.n_max,
        ctx.out.display()
    );
    if let Some(p) = &cfg.poisson {
        s += &format!("poisson window: E {} width {}, T {} width {}, h {:?}\n", p.energy_center, p.energy_width, p.time_center, p.time_width, p.h);
    }
    s
}

fn execute(cmd: Command, cfg: &RunConfig, ctx: &Context) -> Result<i32, Error> {
    Ok(match cmd {
        Command::Orbits => {
            cmd_orbits(cfg, ctx)?;
            EXIT_OK
        }
        Command::Predict => {
            cmd_predict(cfg, ctx)?;
            EXIT_OK
        }
        Command::Quantum => {
            cmd_quantum(cfg, ctx)?;
            EXIT_OK
        }
        Command::Compare => {
            if cmd_compare(cfg, ctx)?.pass {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Command::Check => {
            let r = cmd_check(cfg, ctx)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            if r.pass {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let usage = |msg: String| {
        eprintln!("error: {msg}\n\nUsage: ctrace <orbits|predict|quantum|compare|check> --config PATH [--out DIR] [--workers N] [--dry-run] [--verbose]");
        EXIT_USAGE
    };
    let mut cfg = match (&cli.config, cli.command) {
        (Some(p), _) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return usage(e.to_string()),
        },
        (None, Command::Check) => RunConfig::template("bathtub1d"),
        (None, _) => return usage("--config is required".into()),
    };
    if let Some(w) = cli.workers {
        cfg.output.workers = w;
    }
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    let mut ctx = Context::new(cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir)));
    ctx.verbose = cli.verbose;
    let workers = cfg.output.workers;
    if cli.dry_run {
        if let Err(e) = cfg.build_model() {
            return usage(e.to_string());
        }
        print!("{}", plan(cli.command, &cfg, &ctx, workers));
        return EXIT_OK;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => return usage(e.to_string()),
    };
    match pool.install(|| execute(cli.command, &cfg, &ctx)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
