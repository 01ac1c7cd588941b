//! Mild solutions by implicit-Euler chaining of resolvents:
//! `u^{i+1} = J_dt(u^i)`, together with consistency checks on the resulting
//! step functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Field;
use crate::profiles::Profile;
use crate::resolvent::{ResolventConfig, ResolventSolver};
use crate::sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Requested output times; each is snapped to the nearest multiple of `dt`.
    pub save_times: Vec<f64>,
    /// Solver settings; `lambda` is overridden by `dt`.
    pub resolvent: ResolventConfig,
}

impl EvolveConfig {
    pub fn new(t_final: f64, dt: f64, save_times: Vec<f64>) -> EvolveConfig {
        EvolveConfig { t_final, dt, save_times, resolvent: ResolventConfig::with_lambda(dt) }
    }

    /// Saves every step, including `t = 0`.
    pub fn every_step(t_final: f64, dt: f64) -> EvolveConfig {
        let mut cfg = EvolveConfig::new(t_final, dt, Vec::new());
        if let Ok(n) = cfg.steps() {
            cfg.save_times = (0..=n).map(|i| i as f64 * dt).collect();
        }
        cfg
    }

    /// Number of steps `N = T / dt`; errors unless `T` is a multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t_final.is_finite() && self.dt <= self.t_final) {
            return Err(invalid(format!("need 0 < dt <= t_final, got dt = {}, t_final = {}", self.dt, self.t_final)));
        }
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if ((ratio - n) / n).abs() > 1e-9 {
            return Err(invalid(format!("t_final = {} is not a multiple of dt = {}", self.t_final, self.dt)));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        let n = self.steps()?;
        if let Some(t) = self.save_times.iter().find(|t| !(**t >= 0.0 && **t <= self.t_final * (1.0 + 1e-12))) {
            return Err(invalid(format!("save time {t} outside [0, {}]", self.t_final)));
        }
        ResolventConfig { lambda: self.dt, ..self.resolvent }.validate()?;
        Ok(n)
    }

    /// Step indices of the snapped save times, sorted and deduplicated.
    pub fn save_steps(&self) -> Result<Vec<usize>> {
        let n = self.steps()?;
        let mut steps: Vec<usize> = self.save_times.iter().map(|t| ((t / self.dt).round() as usize).min(n)).collect();
        steps.sort_unstable();
        steps.dedup();
        Ok(steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub newton_iters: usize,
}

impl StepDiagnostics {
    fn of(step: usize, t: f64, u: &Field, newton_iters: usize) -> StepDiagnostics {
        StepDiagnostics { step, t, mass: u.mass(), l1: u.l1(), l2: u.l2(), linf: u.linf(), newton_iters }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Snapped save times, strictly increasing.
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    pub fields: Vec<Field>,
    /// One entry per step, starting with the initial datum at step 0.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.diagnostics.last().map_or(0.0, |d| d.t)
    }

    /// Saved field whose time is nearest to `t`.
    pub fn nearest(&self, t: f64) -> Option<(f64, &Field)> {
        let k = self.times.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?.0;
        Some((self.times[k], &self.fields[k]))
    }

    /// Saved field at step index `step`, if saved.
    pub fn at_step(&self, step: usize) -> Option<&Field> {
        self.steps.binary_search(&step).ok().map(|k| &self.fields[k])
    }
}

/// Chains `N` resolvent solves with `λ = dt`.
pub fn evolve(u0: &Field, profile: &Profile, cfg: &EvolveConfig) -> Result<Trajectory> {
    let n = cfg.validate()?;
    if u0.values().iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial datum contains non-finite values"));
    }
    let save = cfg.save_steps()?;
    let solver = ResolventSolver::new(*u0.grid(), profile, ResolventConfig { lambda: cfg.dt, ..cfg.resolvent })?;
    let time = |i: usize| i as f64 * cfg.dt;

    let mut traj = Trajectory {
        dt: cfg.dt,
        times: Vec::with_capacity(save.len()),
        steps: Vec::with_capacity(save.len()),
        fields: Vec::with_capacity(save.len()),
        diagnostics: Vec::with_capacity(n + 1),
    };
    let mut next_save = save.iter().peekable();
    let mut u = u0.clone();
    traj.diagnostics.push(StepDiagnostics::of(0, 0.0, &u, 0));
    if next_save.peek() == Some(&&0) {
        next_save.next();
        traj.times.push(0.0);
        traj.steps.push(0);
        traj.fields.push(u.clone());
    }
    for i in 1..=n {
        let (next, report) = solver.solve(&u).map_err(|e| Error::Step { step: i, source: Box::new(e) })?;
        u = next;
        traj.diagnostics.push(StepDiagnostics::of(i, time(i), &u, report.iterations));
        if next_save.peek() == Some(&&i) {
            next_save.next();
            traj.times.push(time(i));
            traj.steps.push(i);
            traj.fields.push(u.clone());
        }
    }
    Ok(traj)
}

/// `(J_{t/n})^n u0`.
pub fn exponential_formula(
    u0: &Field,
    profile: &Profile,
    t: f64,
    n: usize,
    resolvent: &ResolventConfig,
) -> Result<Field> {
    if n == 0 || !(t > 0.0) {
        return Err(invalid("need t > 0 and n >= 1"));
    }
    let solver = ResolventSolver::new(*u0.grid(), profile, ResolventConfig { lambda: t / n as f64, ..*resolvent })?;
    let mut u = u0.clone();
    for i in 1..=n {
        u = solver.solve(&u).map_err(|e| Error::Step { step: i, source: Box::new(e) })?.0;
    }
    Ok(u)
}

/// `|(J_{t/n})^n u0 - (J_{t/2n})^{2n} u0|_1` for each `n`.
pub fn exponential_formula_check(
    u0: &Field,
    profile: &Profile,
    t: f64,
    n_list: &[usize],
    resolvent: &ResolventConfig,
) -> Result<Vec<(usize, f64)>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(invalid("n_list must be nonempty, positive and strictly increasing"));
    }
    let mut needed: Vec<usize> = n_list.iter().flat_map(|&n| [n, 2 * n]).collect();
    needed.sort_unstable();
    needed.dedup();
    let results: Vec<(usize, Field)> = needed
        .par_iter()
        .map(|&n| Ok((n, exponential_formula(u0, profile, t, n, resolvent)?)))
        .collect::<Result<_>>()?;
    let get = |n: usize| &results.iter().find(|(m, _)| *m == n).expect("computed above").1;
    n_list.iter().map(|&n| Ok((n, get(n).l1_distance(get(2 * n))?))).collect()
}

/// Largest excess `|S(t)u0 - S(t)v0|_1 - |u0 - v0|_1` over the saved times.
pub fn contraction_check(u0: &Field, v0: &Field, profile: &Profile, cfg: &EvolveConfig) -> Result<f64> {
    u0.same_grid(v0)?;
    let initial = u0.l1_distance(v0)?;
    let (a, b) = rayon::join(|| evolve(u0, profile, cfg), || evolve(v0, profile, cfg));
    let (a, b) = (a?, b?);
    let mut excess = f64::NEG_INFINITY;
    for (ua, ub) in a.fields.iter().zip(&b.fields) {
        excess = excess.max(ua.l1_distance(ub)? - initial);
    }
    if a.fields.is_empty() {
        excess = a.final_time().min(0.0) - 0.0;
    }
    Ok(excess)
}

/// A smooth space-time test function compactly supported in `[0, t_end) × ball`.
pub trait TestFunction: Sync {
    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn time_derivative(&self, t: f64, x: &[f64]) -> f64;
    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn laplacian(&self, t: f64, x: &[f64]) -> f64;
    /// `(center, radius, t_end)` of the support.
    fn support(&self) -> (Vec<f64>, f64, f64);
}

/// `φ(t, x) = (1 - (t/t_end)²)^4 (1 - |x - c|²/R²)^4` on its support; flat in time at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpTestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    pub t_end: f64,
}

const BUMP_POWER: i32 = 4;

impl BumpTestFunction {
    pub fn new(center: Vec<f64>, radius: f64, t_end: f64) -> Result<BumpTestFunction> {
        if !(radius > 0.0 && t_end > 0.0) || center.is_empty() || center.len() > 3 {
            return Err(invalid("bump needs positive radius and t_end and 1 to 3 center coordinates"));
        }
        Ok(BumpTestFunction { center, radius, t_end })
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        if t >= self.t_end || t < 0.0 {
            return (0.0, 0.0);
        }
        let tau = t / self.t_end;
        let s = 1.0 - tau * tau;
        let k = BUMP_POWER as f64;
        (s.powi(BUMP_POWER), -2.0 * k * tau / self.t_end * s.powi(BUMP_POWER - 1))
    }

    fn rho(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(x, c)| (x - c) * (x - c)).sum();
        r2 / (self.radius * self.radius)
    }

    fn space(&self, x: &[f64]) -> f64 {
        let rho = self.rho(x);
        if rho >= 1.0 {
            0.0
        } else {
            (1.0 - rho).powi(BUMP_POWER)
        }
    }
}

impl TestFunction for BumpTestFunction {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.time_factor(t).0 * self.space(x)
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        self.time_factor(t).1 * self.space(x)
    }

    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let rho = self.rho(x);
        let theta = self.time_factor(t).0;
        let r2 = self.radius * self.radius;
        let k = BUMP_POWER as f64;
        for (o, (x, c)) in out.iter_mut().zip(x.iter().zip(&self.center)) {
            *o = if rho >= 1.0 { 0.0 } else { -theta * k * (1.0 - rho).powi(BUMP_POWER - 1) * 2.0 * (x - c) / r2 };
        }
    }

    fn laplacian(&self, t: f64, x: &[f64]) -> f64 {
        let rho = self.rho(x);
        if rho >= 1.0 {
            return 0.0;
        }
        let theta = self.time_factor(t).0;
        let r2 = self.radius * self.radius;
        let k = BUMP_POWER as f64;
        let d = x.len() as f64;
        let s = 1.0 - rho;
        theta * (-k * s.powi(BUMP_POWER - 1) * 2.0 * d / r2 + k * (k - 1.0) * s.powi(BUMP_POWER - 2) * 4.0 * rho / r2)
    }

    fn support(&self) -> (Vec<f64>, f64, f64) {
        (self.center.clone(), self.radius, self.t_end)
    }
}

/// Space-time quadrature of the weak formulation
///
/// ```text
/// ∫∫ u φ_t + b(u) u D·∇φ + β(u) Δφ dx dt + ∫ u0 φ(0) dx
/// ```
///
/// for the step function of `traj`: midpoint rule in space, left endpoint in
/// time. `traj` must hold every step before the end of the test function's
/// support.
pub fn weak_residual(traj: &Trajectory, u0: &Field, profile: &Profile, phi: &dyn TestFunction) -> Result<f64> {
    let grid = *u0.grid();
    let d = grid.d();
    let (center, radius, t_end) = phi.support();
    if center.len() != d {
        return Err(Error::GridMismatch(format!(
            "test function center has {} coordinates, grid has d = {d}",
            center.len()
        )));
    }
    if center.iter().any(|c| c.abs() + radius > grid.half_width() * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "test function support (center {center:?}, radius {radius}) exceeds the box [-{0}, {0}]^{d}",
            grid.half_width()
        )));
    }
    let t_total = traj.final_time();
    if t_end > t_total * (1.0 + 1e-12) {
        return Err(invalid(format!("test function support ends at {t_end} after the trajectory end {t_total}")));
    }
    let dt = traj.dt;
    let last = ((t_end / dt).ceil() as usize).min(traj.diagnostics.len().saturating_sub(1));
    let vol = grid.cell_volume();
    let beta = profile.beta();
    let mobility = profile.mobility();
    let drift = profile.drift();
    let has_drift = !drift.is_zero();

    let mut total = 0.0;
    for i in 0..last {
        let u = traj
            .at_step(i)
            .ok_or_else(|| invalid(format!("weak residual needs every step; step {i} was not saved")))?;
        u.same_grid(u0)?;
        let t = i as f64 * dt;
        let uv = u.values();
        let s = sum::sum_map(uv.len(), |c| {
            let x = grid.center(c);
            let x = &x[..d];
            let v = uv[c];
            let mut acc = v * phi.time_derivative(t, x) + beta.value(v) * phi.laplacian(t, x);
            if has_drift {
                let mut dvec = [0.0; 3];
                let mut grad = [0.0; 3];
                drift.eval(x, &mut dvec[..d]);
                phi.gradient(t, x, &mut grad[..d]);
                let dot: f64 = (0..d).map(|k| dvec[k] * grad[k]).sum();
                acc += mobility.value(v) * v * dot;
            }
            acc
        });
        total += dt * vol * s;
    }
    let uv = u0.values();
    let initial = sum::sum_map(uv.len(), |c| {
        let x = grid.center(c);
        uv[c] * phi.value(0.0, &x[..d])
    });
    Ok(total + vol * initial)
}
