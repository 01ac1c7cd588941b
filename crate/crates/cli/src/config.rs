//! Run configuration: a TOML document parsed into typed sections and
//! validated as a whole, so that every violation is reported at once.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use nfpe_core::measures::{self, MeasureSpec};
use nfpe_core::oracles::{Barenblatt, OracleSolution};
use nfpe_core::particles::{SdeConfig, SigmaConvention};
use nfpe_core::semigroup::EvolveConfig;
use nfpe_core::{Beta, Drift, Field, GridSpec, Mobility, Profile, ResolventConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },

    #[error("invalid configuration {path}:{}", Bullets(.violations))]
    Invalid { path: PathBuf, violations: Vec<String> },
}

struct Bullets<'a>(&'a [String]);

impl fmt::Display for Bullets<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

fn default_mobility() -> Mobility {
    Mobility::Constant { value: 1.0 }
}

fn default_drift() -> Drift {
    Drift::Zero
}

fn default_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub beta: Beta,
    #[serde(default = "default_mobility")]
    pub mobility: Mobility,
    #[serde(default = "default_drift")]
    pub drift: Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub half_width: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub save_times: Vec<f64>,
    /// Save every step (needed by rate fits on saved fields and by particles).
    #[serde(default)]
    pub save_every_step: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        variance: f64,
        #[serde(default = "default_mass")]
        mass: f64,
    },
    /// Porous-medium source solution at time `t0`; `m` is taken from `beta`.
    Barenblatt {
        t0: f64,
        #[serde(default = "default_mass")]
        mass: f64,
    },
    /// Binary field file, relative to the configuration file.
    Field { path: PathBuf },
    /// Atoms `[x_1, .., x_d, weight]` plus an optional density file,
    /// mollified with width `eps` (default four cells).
    Measure {
        #[serde(default)]
        atoms: Vec<Vec<f64>>,
        density: Option<PathBuf>,
        eps: Option<f64>,
        /// Widths for `evolve --measure`; defaults to `[eps]`.
        eps_list: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub compare_times: Vec<f64>,
    #[serde(default = "default_floor")]
    pub density_floor: f64,
    #[serde(default)]
    pub sigma: SigmaConvention,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Write particle positions at every compare time.
    #[serde(default)]
    pub snapshots: bool,
}

fn default_floor() -> f64 {
    1e-12
}

fn default_bins() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub profile: ProfileSection,
    pub grid: GridSection,
    pub time: Option<TimeSection>,
    pub initial: InitialSection,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    pub particles: Option<ParticleSection>,
}

/// A parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub profile: Profile,
    pub grid: GridSpec,
    /// Directory of the configuration file; relative paths resolve against it.
    pub base_dir: PathBuf,
    /// SHA-256 of the configuration file bytes.
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, path, &base_dir)
}

/// Parses `text` as if read from `path`, resolving files against `base_dir`.
pub fn parse_config_str(text: &str, path: &Path, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse { path: path.to_path_buf(), line, column, message: e.message().to_string() }
    })?;
    let mut violations = Vec::new();
    let mut note = |section: &str, msg: String| violations.push(format!("[{section}] {msg}"));

    if raw.schema_version != SCHEMA_VERSION {
        note("top", format!("schema_version = {} is not supported (expected {SCHEMA_VERSION})", raw.schema_version));
    }
    let profile = Profile::new(raw.profile.beta.clone(), raw.profile.mobility.clone(), raw.profile.drift.clone())
        .map_err(|e| note("profile", e.to_string()))
        .ok();
    let grid = GridSpec::new(raw.grid.d, raw.grid.half_width, raw.grid.n).map_err(|e| note("grid", e.to_string())).ok();
    if let (Some(g), Drift::Constant { velocity }) = (&grid, &raw.profile.drift) {
        if velocity.len() != g.d() {
            note("profile", format!("drift velocity has {} components for d = {}", velocity.len(), g.d()));
        }
    }
    if let Err(e) = raw.resolvent.validate() {
        note("resolvent", e.to_string());
    }
    if let Some(time) = &raw.time {
        if let Err(e) = evolve_config(time, &raw.resolvent).validate() {
            note("time", e.to_string());
        }
    }

    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    match &raw.initial {
        InitialSection::Gaussian { center, variance, mass } => {
            if !(*variance > 0.0) {
                note("initial", format!("variance = {variance} must be positive"));
            }
            if !(*mass >= 0.0 && mass.is_finite()) {
                note("initial", format!("mass = {mass} must be finite and nonnegative"));
            }
            if !center.is_empty() && center.len() != raw.grid.d {
                note("initial", format!("center has {} coordinates for d = {}", center.len(), raw.grid.d));
            }
        }
        InitialSection::Barenblatt { t0, mass } => {
            if !(*t0 > 0.0) {
                note("initial", format!("t0 = {t0} must be positive"));
            }
            match raw.profile.beta {
                Beta::PorousMedium { m, .. } if m > 1.0 => {
                    if let Err(e) = Barenblatt::new(raw.grid.d, m, *mass) {
                        note("initial", e.to_string());
                    }
                }
                _ => note("initial", "a barenblatt initial datum needs beta of kind porous_medium with m > 1".into()),
            }
        }
        InitialSection::Field { path } => {
            if let Err(e) = read_field(&resolve(path), grid.as_ref()) {
                note("initial", e);
            }
        }
        InitialSection::Measure { atoms, density, eps, eps_list } => {
            for (i, a) in atoms.iter().enumerate() {
                if a.len() != raw.grid.d + 1 {
                    note("initial", format!("atom {i} has {} entries, expected d + 1 = {}", a.len(), raw.grid.d + 1));
                } else if a.iter().any(|v| !v.is_finite()) {
                    note("initial", format!("atom {i} is not finite"));
                } else if a[..raw.grid.d].iter().any(|x| x.abs() > raw.grid.half_width) {
                    note("initial", format!("atom {i} lies outside the box"));
                }
            }
            if let Some(p) = density {
                if let Err(e) = read_field(&resolve(p), grid.as_ref()) {
                    note("initial", e);
                }
            }
            if let Some(g) = &grid {
                let widths: Vec<f64> = eps.iter().chain(eps_list.iter().flatten()).copied().collect();
                for w in widths {
                    if !(w >= g.h() * (1.0 - 1e-12) && w < g.half_width() / 4.0) {
                        note(
                            "initial",
                            format!(
                                "mollification width {w} must lie in [h, L/4) = [{}, {})",
                                g.h(),
                                g.half_width() / 4.0
                            ),
                        );
                    }
                }
            }
        }
    }
    if let Some(p) = &raw.particles {
        if let Err(e) = sde_config(p).steps() {
            note("particles", e.to_string());
        }
        if p.n < 2 {
            note("particles", format!("n = {} must be at least 2", p.n));
        }
        match &raw.time {
            None => note("particles", "particle runs need a [time] section for the PDE solve".into()),
            Some(t) => {
                if t.t_final < p.t_final * (1.0 - 1e-12) {
                    note(
                        "particles",
                        format!("PDE horizon {} ends before the particle horizon {}", t.t_final, p.t_final),
                    );
                }
            }
        }
    }

    match (profile, grid) {
        (Some(profile), Some(grid)) if violations.is_empty() => {
            Ok(RunConfig { raw, profile, grid, base_dir: base_dir.to_path_buf(), sha256: sha256_hex(text.as_bytes()) })
        }
        _ => Err(ConfigError::Invalid { path: path.to_path_buf(), violations }),
    }
}

fn read_field(path: &Path, grid: Option<&GridSpec>) -> Result<Field, String> {
    let file = File::open(path).map_err(|e| format!("cannot open field file {}: {e}", path.display()))?;
    let field = Field::read_binary(std::io::BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(g) = grid {
        if field.grid() != g {
            return Err(format!(
                "field file {} has grid {:?}, configuration has {:?}",
                path.display(),
                field.grid(),
                g
            ));
        }
    }
    Ok(field)
}

pub fn evolve_config(time: &TimeSection, resolvent: &ResolventConfig) -> EvolveConfig {
    let mut cfg = if time.save_every_step {
        EvolveConfig::every_step(time.t_final, time.dt)
    } else {
        EvolveConfig::new(time.t_final, time.dt, time.save_times.clone())
    };
    cfg.resolvent = ResolventConfig { lambda: time.dt, ..*resolvent };
    cfg
}

pub fn sde_config(p: &ParticleSection) -> SdeConfig {
    SdeConfig {
        dt: p.dt,
        t_final: p.t_final,
        density_floor: p.density_floor,
        compare_times: p.compare_times.clone(),
        sigma: p.sigma,
        bins: p.bins,
    }
}

impl RunConfig {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn evolve_config(&self) -> Option<EvolveConfig> {
        self.raw.time.as_ref().map(|t| evolve_config(t, &self.raw.resolvent))
    }

    /// Mollification width of a measure datum.
    pub fn eps(&self) -> f64 {
        match &self.raw.initial {
            InitialSection::Measure { eps: Some(e), .. } => *e,
            _ => measures::DEFAULT_EPS_CELLS * self.grid.h(),
        }
    }

    pub fn eps_list(&self) -> Vec<f64> {
        match &self.raw.initial {
            InitialSection::Measure { eps_list: Some(l), .. } => l.clone(),
            _ => vec![self.eps()],
        }
    }

    /// The initial datum as a measure (densities become the density part).
    pub fn measure(&self) -> anyhow::Result<MeasureSpec> {
        Ok(match &self.raw.initial {
            InitialSection::Measure { atoms, density, .. } => {
                let d = self.grid.d();
                let atoms = atoms.iter().map(|a| (a[..d].to_vec(), a[d])).collect();
                let density = match density {
                    Some(p) => Some(read_field(&self.resolve(p), Some(&self.grid)).map_err(anyhow::Error::msg)?),
                    None => None,
                };
                MeasureSpec::new(atoms, density)?
            }
            _ => MeasureSpec::new(Vec::new(), Some(self.initial_field()?))?,
        })
    }

    /// The initial datum on the grid; measures are mollified with [`eps`](Self::eps).
    pub fn initial_field(&self) -> anyhow::Result<Field> {
        let grid = self.grid;
        let d = grid.d();
        Ok(match &self.raw.initial {
            InitialSection::Gaussian { center, variance, mass } => {
                let c = if center.is_empty() { vec![0.0; d] } else { center.clone() };
                let norm = mass * (2.0 * std::f64::consts::PI * variance).powf(-(d as f64) / 2.0);
                Field::from_fn(grid, |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(x, c)| (x - c).powi(2)).sum();
                    norm * (-r2 / (2.0 * variance)).exp()
                })
            }
            InitialSection::Barenblatt { t0, mass } => {
                let m = match self.raw.profile.beta {
                    Beta::PorousMedium { m, .. } => m,
                    _ => unreachable!("validated"),
                };
                OracleSolution::Barenblatt(Barenblatt::new(d, m, *mass)?).cell_averages(
                    grid,
                    *t0,
                    if d == 1 { 4 } else { 1 },
                )?
            }
            InitialSection::Field { path } => {
                read_field(&self.resolve(path), Some(&grid)).map_err(anyhow::Error::msg)?
            }
            InitialSection::Measure { .. } => measures::mollify(&self.measure()?, self.eps(), grid)?,
        })
    }

    pub fn sde_config(&self) -> Option<SdeConfig> {
        self.raw.particles.as_ref().map(sde_config)
    }
}
