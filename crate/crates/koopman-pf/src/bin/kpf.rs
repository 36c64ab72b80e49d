//! `kpf` — Koopman participation-factor pipeline driver.
//!
//! Thin argument-parsing shell over `koopman_pf::commands`: merges the
//! `--config` file with CLI overrides, dispatches the subcommand, prints the
//! one-line summary, and maps errors onto the stable exit-code contract
//! (0 ok, 2 config, 3 numeric, 4 rank-strict, 5 PF-strict).

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use koopman_pf::commands::{self, exit_code};
use koopman_pf::config::{AnalysisConfig, InputConfig};
use koopman_pf::participation::PfMethod;
use koopman_pf::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kpf",
    version,
    about = "Koopman-mode participation factors from trajectory data",
    long_about = "Simulate benchmark models, fit EDMD Koopman decompositions, and compute \
                  linear and Koopman modal participation factors. Configuration comes from \
                  a JSON file (--config) with CLI flags taking precedence."
)]
struct Cli {
    /// Analysis configuration file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the Monte Carlo seed of the initial-state distribution.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Escalate warnings: rank-deficient fits exit 4, non-convergent
    /// expectation estimates exit 5.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a model preset and write `trajectory.csv`.
    Simulate {
        /// Model preset: canonical, canonical-lifted or swing4.
        #[arg(long, value_name = "NAME")]
        model: Option<String>,
        /// Initial state, comma-separated (e.g. `--x0 -1,2`).
        #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
        x0: Option<String>,
        /// Integration step in seconds.
        #[arg(long, value_name = "SECONDS")]
        dt: Option<f64>,
        /// Number of RK4 steps (trajectory has steps + 1 samples).
        #[arg(long, value_name = "N")]
        steps: Option<usize>,
    },
    /// Fit the Koopman operator; write modes, eigen-matrices and the bundle.
    Decompose {
        /// Trajectory CSV; repeat the flag to concatenate trajectories
        /// (no snapshot pairs are formed across file boundaries).
        #[arg(long = "input", value_name = "FILE")]
        input: Vec<PathBuf>,
        /// Sampling interval for CSV files without a `t` column.
        #[arg(long, value_name = "SECONDS")]
        dt: Option<f64>,
    },
    /// Compute participation factors (P, P-normalized, Pi).
    Pf {
        /// Participation method; `general` adds Monte Carlo cross terms.
        #[arg(long, value_enum, value_name = "METHOD")]
        method: Option<MethodArg>,
    },
    /// Condense prior outputs into a human-readable `report.md`.
    Report,
}

#[derive(Copy, Clone, ValueEnum)]
enum MethodArg {
    Simplified,
    General,
}

fn parse_x0(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad --x0 component `{tok}`")))
        })
        .collect()
}

fn apply_preset_overrides(
    cfg: &mut AnalysisConfig,
    model: Option<String>,
    x0: Option<Vec<f64>>,
    dt: Option<f64>,
    steps: Option<usize>,
) -> Result<()> {
    match (model, cfg.input.as_mut()) {
        (Some(name), _) => {
            cfg.input = Some(InputConfig::Preset { name, x0, dt, steps });
        }
        (None, Some(InputConfig::Preset { x0: cfg_x0, dt: cfg_dt, steps: cfg_steps, .. })) => {
            if x0.is_some() {
                *cfg_x0 = x0;
            }
            if dt.is_some() {
                *cfg_dt = dt;
            }
            if steps.is_some() {
                *cfg_steps = steps;
            }
        }
        (None, _) => {
            if x0.is_some() || dt.is_some() || steps.is_some() {
                return Err(Error::InvalidConfig(
                    "--x0/--dt/--steps need --model or a preset input in the config".into(),
                ));
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = match &cli.config {
        Some(path) => AnalysisConfig::from_file(path)?,
        None => AnalysisConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }

    match cli.command {
        Command::Simulate { model, x0, dt, steps } => {
            let x0 = x0.as_deref().map(parse_x0).transpose()?;
            apply_preset_overrides(&mut cfg, model, x0, dt, steps)?;
            cfg.validate()?;
            commands::cmd_simulate(&cfg)
        }
        Command::Decompose { input, dt } => {
            if !input.is_empty() {
                cfg.input = Some(InputConfig::Csv { paths: input, dt });
            } else if let (Some(dt), Some(InputConfig::Csv { dt: cfg_dt @ None, .. })) =
                (dt, cfg.input.as_mut())
            {
                *cfg_dt = Some(dt);
            }
            cfg.validate()?;
            commands::cmd_decompose(&cfg, cli.strict)
        }
        Command::Pf { method } => {
            if let Some(method) = method {
                cfg.pf_method = match method {
                    MethodArg::Simplified => PfMethod::Simplified,
                    MethodArg::General => PfMethod::General,
                };
            }
            cfg.validate()?;
            commands::cmd_pf(&cfg, cli.strict, cli.seed)
        }
        Command::Report => {
            cfg.validate()?;
            commands::cmd_report(&cfg)
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}
