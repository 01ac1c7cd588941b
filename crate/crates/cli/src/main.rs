use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nfpe_cli::commands::{self, OracleArgs};
use nfpe_cli::config::{parse_config, RunConfig};
use nfpe_core::diagnostics::DiagnosticsConfig;
use nfpe_core::oracles::OracleKind;
use nfpe_core::GridSpec;

#[derive(Parser)]
#[command(name = "nfpe", version, about = "Nonlinear Fokker-Planck solver and diagnostics")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides the config seed (and the diagnostics seed for `verify`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output` from the config, else `out/<command>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Barenblatt,
    Heat,
    DriftedHeat,
    LinearResolventKernel,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one resolvent equation with the initial datum as right-hand side.
    Resolvent(RunArgs),
    /// Implicit Euler evolution.
    Evolve {
        #[command(flatten)]
        run: RunArgs,
        /// Treat the initial datum as a measure and evolve every width of `eps_list`.
        #[arg(long)]
        measure: bool,
    },
    /// Cell averages of a reference solution.
    Oracle {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        t: f64,
        /// Grid as `d,L,n`.
        #[arg(long, value_parser = parse_grid, default_value = "1,4,256")]
        grid: GridSpec,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Porous-medium exponent.
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long, value_delimiter = ',')]
        drift: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value = "out/oracle")]
        out: PathBuf,
    },
    /// Fit the sup-norm decay rate of an `evolve` output directory.
    Rate {
        #[arg(long)]
        traj: PathBuf,
        /// Fit window `t_min,t_max` (default `10 dt, T/2`).
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Particle simulation compared with the PDE marginals.
    Particles(RunArgs),
    /// Run a diagnostics suite; exits nonzero if any check fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        n_particles: Option<usize>,
    },
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [d, l, n] = parts.as_slice() else {
        return Err("expected d,L,n".into());
    };
    let d: usize = d.parse().map_err(|e| format!("d: {e}"))?;
    let l: f64 = l.parse().map_err(|e| format!("L: {e}"))?;
    let n: usize = n.parse().map_err(|e| format!("n: {e}"))?;
    GridSpec::new(d, l, n).map_err(|e| e.to_string())
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t_min,t_max")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("t_min: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("t_max: {e}"))?;
    Ok((a, b))
}

fn load(args: &RunArgs, seed: Option<u64>, command: &str) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(seed) = seed {
        cfg.raw.seed = seed;
    }
    let out = args.out.clone().or_else(|| cfg.raw.output.clone()).unwrap_or_else(|| Path::new("out").join(command));
    Ok((cfg, out))
}

fn report_written(manifest: &nfpe_cli::Manifest, out: &Path) {
    println!("wrote {} files to {}", manifest.outputs.len() + 1, out.display());
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("building the thread pool")?;
    }
    match cli.command {
        Command::Resolvent(args) => {
            let (cfg, out) = load(&args, cli.seed, "resolvent")?;
            report_written(&commands::run_resolvent(&cfg, &out)?, &out);
        }
        Command::Evolve { run, measure } => {
            let (cfg, out) = load(&run, cli.seed, "evolve")?;
            report_written(&commands::run_evolve(&cfg, &out, measure)?, &out);
        }
        Command::Particles(args) => {
            let (cfg, out) = load(&args, cli.seed, "particles")?;
            report_written(&commands::run_particles(&cfg, &out)?, &out);
        }
        Command::Oracle { kind, t, grid, mass, m, drift, lambda, out } => {
            let kind = match kind {
                Kind::Barenblatt => OracleKind::Barenblatt,
                Kind::Heat => OracleKind::Heat,
                Kind::DriftedHeat => OracleKind::DriftedHeat,
                Kind::LinearResolventKernel => OracleKind::LinearResolventKernel,
            };
            let args = OracleArgs { kind, t, grid, mass, m, drift, lambda };
            report_written(&commands::run_oracle(&args, &out)?, &out);
        }
        Command::Rate { traj, window } => {
            let report = commands::run_rate(&traj, window)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Verify { suite, json, n_particles } => {
            let mut dcfg = DiagnosticsConfig::default();
            if let Some(s) = cli.seed {
                dcfg.seed = s;
            }
            if let Some(n) = n_particles {
                dcfg.n_particles = n;
            }
            let report = commands::run_verify(&suite, &dcfg)?;
            print!("{}", commands::format_report(&report));
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report)? + "\n";
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            return Ok(report.all_passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
