//! Subcommand implementations. Each writes its outputs plus a `manifest.json`
//! into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nfpe_core::analysis::{self, DecayFit};
use nfpe_core::diagnostics::{self, DiagnosticsConfig, SuiteReport};
use nfpe_core::grid::fmt_f64;
use nfpe_core::measures;
use nfpe_core::oracles::{Barenblatt, OracleKind, OracleSolution};
use nfpe_core::particles;
use nfpe_core::resolvent::ResolventSolver;
use nfpe_core::semigroup::{self, EvolveConfig};
use nfpe_core::{Field, GridSpec, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

/// Provenance of a run. Nothing here depends on the thread count; only
/// `wall_time_seconds` varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub d: usize,
    pub alpha: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub outputs: Vec<OutputEntry>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    fn new(command: &str, cfg: Option<&RunConfig>, d: usize) -> Manifest {
        Manifest {
            tool: "nfpe".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: cfg.map(|c| c.sha256.clone()),
            seed: cfg.map_or(0, |c| c.raw.seed),
            d,
            alpha: cfg.and_then(|c| c.profile.alpha()),
            dt: None,
            t_final: None,
            outputs: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Output directory that records what it writes.
struct Outputs {
    dir: PathBuf,
    manifest: Manifest,
    started: Instant,
}

impl Outputs {
    fn create(dir: &Path, manifest: Manifest) -> Result<Outputs> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf(), manifest, started: Instant::now() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        w.write_all(bytes)?;
        w.flush()?;
        self.manifest.outputs.push(OutputEntry { file: name.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn write_field(&mut self, name: &str, field: &Field) -> Result<()> {
        let mut buf = Vec::new();
        field.write_binary(&mut buf)?;
        self.write(name, &buf)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self) -> Result<Manifest> {
        self.manifest.outputs.sort_by(|a, b| a.file.cmp(&b.file));
        self.manifest.wall_time_seconds = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(self.manifest)
    }
}

pub fn field_file_name(step: usize) -> String {
    format!("u_{step:06}.field")
}

/// Solves one resolvent equation with the initial datum as right-hand side.
pub fn run_resolvent(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let f = cfg.initial_field()?;
    let mut manifest = Manifest::new("resolvent", Some(cfg), cfg.grid.d());
    manifest.dt = Some(cfg.raw.resolvent.lambda);
    let mut outputs = Outputs::create(out, manifest)?;
    let solver = ResolventSolver::new(cfg.grid, &cfg.profile, cfg.raw.resolvent)?;
    let (u, report) = solver.solve(&f)?;
    outputs.write_field("f.field", &f)?;
    outputs.write_field("u.field", &u)?;
    outputs.write_json("report.json", &report)?;
    outputs.finish()
}

fn diagnostics_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,mass,l1,l2,linf,newton_iters\n");
    for d in &traj.diagnostics {
        s += &format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(d.t),
            fmt_f64(d.mass),
            fmt_f64(d.l1),
            fmt_f64(d.l2),
            fmt_f64(d.linf),
            d.newton_iters
        );
    }
    s
}

fn require_time(cfg: &RunConfig) -> Result<EvolveConfig> {
    cfg.evolve_config().context("this command needs a [time] section")
}

/// Implicit Euler evolution; with `measure` the initial datum is evolved for
/// every width of `eps_list` and a stability report is written.
pub fn run_evolve(cfg: &RunConfig, out: &Path, measure: bool) -> Result<Manifest> {
    let ecfg = require_time(cfg)?;
    let mut manifest = Manifest::new("evolve", Some(cfg), cfg.grid.d());
    manifest.dt = Some(ecfg.dt);
    manifest.t_final = Some(ecfg.t_final);
    let mut outputs = Outputs::create(out, manifest)?;
    let traj = if measure {
        let mu = cfg.measure()?;
        let (traj, report) = measures::evolve_measure(&mu, cfg.grid, &cfg.profile, &cfg.eps_list(), &ecfg)?;
        outputs.write_json("stability.json", &report)?;
        traj
    } else {
        semigroup::evolve(&cfg.initial_field()?, &cfg.profile, &ecfg)?
    };
    for (step, field) in traj.steps.iter().zip(&traj.fields) {
        outputs.write_field(&field_file_name(*step), field)?;
    }
    outputs.write("diagnostics.csv", diagnostics_csv(&traj).as_bytes())?;
    outputs.finish()
}

/// Parameters of a reference solution requested on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleArgs {
    pub kind: OracleKind,
    pub t: f64,
    pub grid: GridSpec,
    pub mass: f64,
    pub m: f64,
    pub drift: Vec<f64>,
    pub lambda: f64,
}

pub fn build_oracle(args: &OracleArgs) -> Result<OracleSolution> {
    let d = args.grid.d();
    Ok(match args.kind {
        OracleKind::Barenblatt => OracleSolution::Barenblatt(Barenblatt::new(d, args.m, args.mass)?),
        OracleKind::Heat => OracleSolution::Heat { d, drift: vec![0.0; d] },
        OracleKind::DriftedHeat => {
            if args.drift.len() != d {
                bail!("drifted heat kernel needs {d} drift components, got {}", args.drift.len());
            }
            OracleSolution::Heat { d, drift: args.drift.clone() }
        }
        OracleKind::LinearResolventKernel => OracleSolution::LinearResolventKernel { lambda: args.lambda },
    })
}

/// Writes cell averages of a reference solution.
pub fn run_oracle(args: &OracleArgs, out: &Path) -> Result<Manifest> {
    let oracle = build_oracle(args)?;
    let field = oracle.cell_averages(args.grid, args.t, 2)?;
    let mut manifest = Manifest::new("oracle", None, args.grid.d());
    manifest.t_final = Some(args.t);
    let mut outputs = Outputs::create(out, manifest)?;
    outputs.write_field("oracle.field", &field)?;
    let params: std::collections::BTreeMap<String, f64> = oracle.params().into_iter().collect();
    outputs.write_json("oracle.json", &serde_json::json!({ "kind": oracle.kind(), "t": args.t, "params": params }))?;
    outputs.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub slope: f64,
    pub r2: f64,
    pub theory_rate: Option<f64>,
    pub gap: Option<f64>,
    pub samples: usize,
    pub window: (f64, f64),
    pub source_config_sha256: Option<String>,
}

fn read_diagnostics(dir: &Path) -> Result<Vec<(f64, f64)>> {
    let path = dir.join("diagnostics.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().context("empty diagnostics.csv")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).with_context(|| format!("no column {name}"));
    let (it, il) = (col("t")?, col("linf")?);
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            let parse = |k: usize| -> Result<f64> {
                let cell = cells.get(k).with_context(|| format!("diagnostics.csv row {} is short", i + 2))?;
                cell.parse().with_context(|| format!("diagnostics.csv row {}: bad number {cell:?}", i + 2))
            };
            Ok((parse(it)?, parse(il)?))
        })
        .collect()
}

/// Fits `|u(t)|_∞ ~ t^slope` over an evolve output directory and compares
/// with the smoothing rate `-d/(2+(α-1)d)`.
pub fn run_rate(traj_dir: &Path, window: Option<(f64, f64)>) -> Result<RateReport> {
    let manifest = Manifest::read(traj_dir)?;
    if manifest.command != "evolve" {
        bail!("{} holds `{}` output, expected `evolve`", traj_dir.display(), manifest.command);
    }
    let samples = read_diagnostics(traj_dir)?;
    let window = match window {
        Some(w) => w,
        None => {
            let dt = manifest.dt.context("manifest has no dt")?;
            let t_final = manifest.t_final.context("manifest has no t_final")?;
            (10.0 * dt, 0.5 * t_final)
        }
    };
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        bail!("window ({lo}, {hi}) must satisfy 0 < t_min < t_max");
    }
    let inside: Vec<(f64, f64)> =
        samples.into_iter().filter(|(t, _)| *t >= lo * (1.0 - 1e-12) && *t <= hi * (1.0 + 1e-12)).collect();
    let DecayFit { slope, r_squared, samples, .. } = analysis::fit_power_law(&inside)?;
    let theory_rate = match manifest.alpha {
        Some(alpha) => Some(-analysis::smoothing_exponents(manifest.d, alpha)?.0),
        None => None,
    };
    Ok(RateReport {
        slope,
        r2: r_squared,
        theory_rate,
        gap: theory_rate.map(|r| (slope - r).abs()),
        samples,
        window,
        source_config_sha256: manifest.config_sha256,
    })
}

/// Particle simulation against a PDE solve saved at every step.
pub fn run_particles(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let time = require_time(cfg)?;
    let sde = cfg.sde_config().context("this command needs a [particles] section")?;
    let section = cfg.raw.particles.as_ref().expect("checked above");
    let mut ecfg = EvolveConfig::every_step(time.t_final, time.dt);
    ecfg.resolvent = time.resolvent;
    let mu = cfg.measure()?;
    let traj = semigroup::evolve(&cfg.initial_field()?, &cfg.profile, &ecfg)?;
    let (ensembles, comparisons) = particles::simulate(&mu, &traj, &cfg.profile, &sde, section.n, cfg.raw.seed)?;

    let mut manifest = Manifest::new("particles", Some(cfg), cfg.grid.d());
    manifest.dt = Some(sde.dt);
    manifest.t_final = Some(sde.t_final);
    let mut outputs = Outputs::create(out, manifest)?;
    let mut csv = String::from("t,l1_hist_distance,w1_distance,n_particles\n");
    for c in &comparisons {
        let w1 = c.w1_distance.map(fmt_f64).unwrap_or_default();
        csv += &format!("{},{},{},{}\n", fmt_f64(c.t), fmt_f64(c.l1_hist_distance), w1, c.n_particles);
    }
    outputs.write("marginals.csv", csv.as_bytes())?;
    outputs.write_json("marginals.json", &comparisons)?;
    if section.snapshots {
        for e in &ensembles {
            outputs.write(&format!("particles_{:06}.bin", e.step_index), &e.to_le_bytes())?;
        }
    }
    outputs.finish()
}

pub fn run_verify(suite: &str, cfg: &DiagnosticsConfig) -> Result<SuiteReport> {
    Ok(diagnostics::run_suite(suite, cfg)?)
}

/// Plain-text table of a suite report.
pub fn format_report(report: &SuiteReport) -> String {
    let mut s = format!("suite {} ({})\n", report.suite, report.slack_convention);
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        s += &format!(
            "[{status}] {:<40} value {:>12.4e}  bound {:>12.4e}  slack {:>9.2e}  {}\n",
            c.name, c.value, c.bound, c.slack, c.anchor
        );
        if let Some(e) = &c.error {
            s += &format!("       error: {e}\n");
        }
    }
    s += &format!("{}\n", if report.all_passed { "all checks passed" } else { "some checks FAILED" });
    s
}
