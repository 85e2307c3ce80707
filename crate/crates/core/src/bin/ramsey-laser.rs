//! Command-line front end: `analytic`, `validate`, `simulate`, `sweep` and
//! `replay`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ramsey_laser::cli::commands::render_regime;
use ramsey_laser::cli::{self, exit_code, parse_config, RunConfig};
use ramsey_laser::{Error, Result};

#[derive(Parser)]
#[command(name = "ramsey-laser", version, about = "Linewidth of a bad-cavity laser pumped by Ramsey-separated atoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration document (TOML with dotted keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset supplying defaults (`ca40` or `desk`); overrides the document.
    #[arg(long)]
    preset: Option<String>,
    /// Base seed; trajectory i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trajectories.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "ramsey-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form steady state and linewidths.
    Analytic(Common),
    /// Check the bad-cavity regime chain.
    Validate(Common),
    /// Simulate an ensemble of trajectories and estimate linewidths.
    Simulate(Common),
    /// Sweep one parameter (the `sweep.*` keys of the configuration).
    Sweep(Common),
    /// Repeat the run recorded in a manifest and compare output digests.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "ramsey-replay")]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load(common: &Common) -> Result<RunConfig> {
    let text = match &common.config {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let mut run = match &common.preset {
        None => parse_config(&text)?,
        Some(name) => {
            // Validate the document as written first so that errors carry
            // its own line numbers, then swap the preset.
            parse_config(&text)?;
            let mut table: toml::Table =
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            table.insert("preset".into(), toml::Value::String(name.clone()));
            let merged = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
            parse_config(&merged)?
        }
    };
    if let Some(seed) = common.seed {
        run.sim.seed = seed;
    }
    if let Some(n) = common.trajectories {
        if n == 0 {
            return Err(Error::Config("--trajectories must be >= 1".into()));
        }
        run.sim.trajectories = n;
        if let Some(sw) = run.sweep.as_mut() {
            sw.trajectories_per_point = n;
        }
    }
    eprintln!("# resolved configuration\n{}", run.echo());
    Ok(run)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analytic(c) => {
            let run = load(&c)?;
            let report = cli::cmd_analytic(&run, &c.out)?;
            print!("{}", report.table.render());
            eprint!("{}", render_regime(&report.regime));
        }
        Command::Validate(c) => {
            let run = load(&c)?;
            let report = cli::cmd_validate(&run)?;
            print!("{}", render_regime(&report));
            if !report.pass {
                return Err(Error::Config("regime chain violated".into()));
            }
        }
        Command::Simulate(c) => {
            let run = load(&c)?;
            for w in run.sim_config(run.laser, run.sim.seed)?.warnings() {
                eprintln!("warning: {w}");
            }
            let report = cli::cmd_simulate(&run, &c.out)?;
            let ens = &report.ensemble;
            for (seed, e) in report.seeds.iter().zip(&ens.estimates) {
                if let Err(msg) = e {
                    eprintln!("trajectory with seed {seed} failed: {msg}");
                }
            }
            print!("{}", read(&c.out.join("summary.csv"))?);
        }
        Command::Sweep(c) => {
            let run = load(&c)?;
            let report = cli::cmd_sweep(&run, &c.out)?;
            print!("{}", report.table.render());
            if let Some((v, se)) = cli::fringe_visibility(&report.rows) {
                eprintln!("simulated fringe visibility {v:.4} ± {se:.4}");
            }
        }
        Command::Replay { manifest, out } => {
            let report = cli::cmd_replay(&read(&manifest)?, &out)?;
            for (name, want, got) in &report.files {
                let verdict = if got.as_deref() == Some(want.as_str()) { "match" } else { "DIFFER" };
                println!("{verdict} {name}");
            }
            if !report.all_match() {
                return Err(Error::Insufficient("replayed outputs differ from the manifest".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
