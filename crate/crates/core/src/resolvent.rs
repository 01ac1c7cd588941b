//! The discrete resolvent `J_λ f`: the solution u of
//!
//! ```text
//! u - λ Δβ̃_ε(u) + λ ε β̃_ε(u) + λ div(D_ε b_ε(u) u) = f
//! ```
//!
//! in conservative finite-volume form with zero flux through the box faces.
//! Diffusive fluxes are centered differences of β̃_ε(u); the drift flux is an
//! upwind (Engquist-Osher) flux of g(u) = b_ε(u) u, which reduces to the
//! donor-cell value whenever g is nondecreasing. Both choices make the
//! discrete operator monotone, so the solver inherits order preservation,
//! positivity and L¹ contraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, GridSpec};
use crate::linalg::StencilMatrix;
use crate::profiles::{Drift, Profile, RegularizedProfile};
use crate::sum;

const ARMIJO: f64 = 1e-4;
const DAMPING_FLOOR: f64 = 1.0 / (1u64 << 20) as f64;
const LINEAR_MAX_ITER: usize = 5000;
const PICARD_MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolventConfig {
    pub lambda: f64,
    pub eps: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub picard_fallback: bool,
    /// Apply the drift cutoff beyond radius 1/ε (only meaningful for ε > 0).
    pub drift_cutoff: bool,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        ResolventConfig {
            lambda: 0.1,
            eps: 0.0,
            newton_tol: 1e-12,
            newton_max: 200,
            picard_fallback: true,
            drift_cutoff: false,
        }
    }
}

impl ResolventConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        ResolventConfig { lambda, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            problems.push(format!("lambda = {} must be positive", self.lambda));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol <= 1e-6) {
            problems.push(format!("newton_tol = {} must lie in (0, 1e-6]", self.newton_tol));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            problems.push(format!("eps = {} must be >= 0", self.eps));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(invalid(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub iterations: usize,
    /// `|residual|_1 / |f|_1` at exit.
    pub final_residual: f64,
    pub used_fallback: bool,
    pub mass_in: f64,
    pub mass_out: f64,
}

/// The discrete operator `u ↦ u + λ A_h u` on a fixed grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: GridSpec,
    profile: RegularizedProfile,
    lambda: f64,
    /// Normal drift component on the upper face of each cell, per axis;
    /// zero on box faces.
    face_drift: Vec<Vec<f64>>,
    has_drift: bool,
}

/// Per-cell coefficients feeding the matrix assembly: the slope (or secant)
/// of β̃ and of the two monotone parts of g.
struct CellCoeffs {
    beta: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
}

impl DiscreteOperator {
    pub fn new(grid: GridSpec, profile: RegularizedProfile, lambda: f64) -> Result<DiscreteOperator> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda = {lambda} must be positive")));
        }
        let d = grid.d();
        if let Drift::Constant { velocity } = profile.base().drift() {
            if velocity.len() != d {
                return Err(Error::GridMismatch(format!(
                    "drift velocity has {} components on a {d}-dimensional grid",
                    velocity.len()
                )));
            }
        }
        let n = grid.n();
        let h = grid.h();
        let has_drift = !profile.base().drift().is_zero();
        let mut face_drift = vec![vec![0.0; grid.len()]; d];
        if has_drift {
            for (k, faces) in face_drift.iter_mut().enumerate() {
                let s = grid.stride(k);
                faces.par_iter_mut().enumerate().for_each(|(i, c)| {
                    if (i / s) % n + 1 < n {
                        let mut x = grid.center(i);
                        x[k] += 0.5 * h;
                        let mut out = [0.0; 3];
                        profile.drift(&x[..d], &mut out[..d]);
                        *c = out[k];
                    }
                });
            }
        }
        Ok(DiscreteOperator { grid, profile, lambda, face_drift, has_drift })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn profile(&self) -> &RegularizedProfile {
        &self.profile
    }

    fn beta_values(&self, u: &[f64]) -> Vec<f64> {
        u.par_iter().map(|&v| self.profile.beta_tilde(v)).collect()
    }

    fn split_values(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        if !self.has_drift {
            return (Vec::new(), Vec::new());
        }
        u.par_iter().map(|&v| self.profile.g_split(v)).unzip()
    }

    /// Divergence part `Σ_k (F_{i+½} - F_{i-½}) / h` of every cell.
    fn flux_divergence(&self, bt: &[f64], up: &[f64], down: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.n();
        let h = g.h();
        let inv_h = 1.0 / h;
        let flux = |k: usize, i: usize| -> f64 {
            let j = i + g.stride(k);
            let mut f = -(bt[j] - bt[i]) * inv_h;
            if self.has_drift {
                let c = self.face_drift[k][i];
                if c > 0.0 {
                    f += c * (up[i] + down[j]);
                } else if c < 0.0 {
                    f += c * (up[j] + down[i]);
                }
            }
            f
        };
        (0..g.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for k in 0..g.d() {
                    let s = g.stride(k);
                    let pos = (i / s) % n;
                    if pos + 1 < n {
                        acc += flux(k, i);
                    }
                    if pos > 0 {
                        acc -= flux(k, i - s);
                    }
                }
                acc * inv_h
            })
            .collect()
    }

    fn apply_values(&self, u: &[f64]) -> Vec<f64> {
        let bt = self.beta_values(u);
        let (up, down) = self.split_values(u);
        let div = self.flux_divergence(&bt, &up, &down);
        let le = self.lambda * self.profile.eps();
        u.par_iter()
            .zip(div.par_iter().zip(bt.par_iter()))
            .map(|(u, (div, bt))| u + self.lambda * div + le * bt)
            .collect()
    }

    /// Left-hand side `u + λ A_h(u)`.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.check_grid(u)?;
        Field::from_values(self.grid, self.apply_values(u.values()))
    }

    fn check_grid(&self, u: &Field) -> Result<()> {
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch(format!("{:?} vs operator grid {:?}", u.grid(), self.grid)));
        }
        Ok(())
    }

    fn residual_values(&self, u: &[f64], f: &[f64]) -> Vec<f64> {
        let mut r = self.apply_values(u);
        r.par_iter_mut().zip(f.par_iter()).for_each(|(r, f)| *r -= f);
        r
    }

    fn assemble(&self, c: &CellCoeffs) -> StencilMatrix {
        let g = self.grid;
        let n = g.n();
        let inv_h = 1.0 / g.h();
        let scale = self.lambda * inv_h;
        let le = self.lambda * self.profile.eps();
        // derivative of the face flux with respect to its left and right cell
        let left = |k: usize, i: usize| -> f64 {
            let mut a = c.beta[i] * inv_h;
            if self.has_drift {
                let v = self.face_drift[k][i];
                a += v.max(0.0) * c.up[i] + v.min(0.0) * c.down[i];
            }
            a
        };
        let right = |k: usize, j: usize, i: usize| -> f64 {
            let mut b = -c.beta[j] * inv_h;
            if self.has_drift {
                let v = self.face_drift[k][i];
                b += v.max(0.0) * c.down[j] + v.min(0.0) * c.up[j];
            }
            b
        };
        let rows: Vec<(f64, [f64; 3], [f64; 3])> = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let mut diag = 1.0 + le * c.beta[i];
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for k in 0..g.d() {
                    let s = g.stride(k);
                    let pos = (i / s) % n;
                    if pos + 1 < n {
                        diag += scale * left(k, i);
                        hi[k] = scale * right(k, i + s, i);
                    }
                    if pos > 0 {
                        lo[k] = -scale * left(k, i - s);
                        diag -= scale * right(k, i, i - s);
                    }
                }
                (diag, lo, hi)
            })
            .collect();
        let mut m = StencilMatrix::zeros(g);
        for (i, (diag, lo, hi)) in rows.into_iter().enumerate() {
            m.diag[i] = diag;
            for k in 0..g.d() {
                m.lower[k][i] = lo[k];
                m.upper[k][i] = hi[k];
            }
        }
        m
    }

    /// Exact Jacobian of `u ↦ u + λ A_h(u)`.
    pub fn jacobian(&self, u: &[f64]) -> StencilMatrix {
        let p = &self.profile;
        let beta = u.par_iter().map(|&v| p.beta_tilde_prime(v)).collect();
        let (up, down) =
            if self.has_drift { u.par_iter().map(|&v| p.g_split_prime(v)).unzip() } else { (Vec::new(), Vec::new()) };
        self.assemble(&CellCoeffs { beta, up, down })
    }

    /// Frozen-coefficient (secant) linearization used by the Picard fallback.
    fn picard_matrix(&self, u: &[f64]) -> StencilMatrix {
        let p = &self.profile;
        let secant = |v: f64, value: f64, slope_at_zero: f64| {
            if v == 0.0 {
                slope_at_zero
            } else {
                value / v
            }
        };
        let beta = u.par_iter().map(|&v| secant(v, p.beta_tilde(v), p.beta_tilde_prime(0.0))).collect();
        let (up, down) = if self.has_drift {
            let (up0, down0) = p.g_split_prime(0.0);
            u.par_iter()
                .map(|&v| {
                    let (a, b) = p.g_split(v);
                    (secant(v, a, up0).max(0.0), secant(v, b, down0).min(0.0))
                })
                .unzip()
        } else {
            (Vec::new(), Vec::new())
        };
        self.assemble(&CellCoeffs { beta, up, down })
    }

    /// Residual level attainable in floating point for the iterate `u`.
    fn roundoff_floor(&self, u: &[f64]) -> f64 {
        let h = self.grid.h();
        let vol = self.grid.cell_volume();
        let d = self.grid.d() as f64;
        let u_l1 = vol * sum::sum_map(u.len(), |i| u[i].abs());
        let bt_l1 = vol * sum::sum_map(u.len(), |i| self.profile.beta_tilde(u[i]).abs());
        let vmax = self.face_drift.iter().flat_map(|f| f.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let drift_term = if self.has_drift { self.lambda * vmax / h * u_l1 } else { 0.0 };
        256.0 * f64::EPSILON * (u_l1 + self.lambda * 4.0 * d / (h * h) * bt_l1 + drift_term)
    }
}

fn l1_of(grid: &GridSpec, r: &[f64]) -> f64 {
    grid.cell_volume() * sum::sum_map(r.len(), |i| r[i].abs())
}

fn l2sq_of(r: &[f64]) -> f64 {
    sum::dot(r, r)
}

/// Solver for `J_λ` on a fixed grid and profile; reusable across many right-hand sides.
#[derive(Debug, Clone)]
pub struct ResolventSolver {
    op: DiscreteOperator,
    cfg: ResolventConfig,
}

impl ResolventSolver {
    pub fn new(grid: GridSpec, profile: &Profile, cfg: ResolventConfig) -> Result<ResolventSolver> {
        cfg.validate()?;
        let reg = RegularizedProfile::new(profile.clone(), cfg.eps)?.with_cutoff(cfg.drift_cutoff);
        let op = DiscreteOperator::new(grid, reg, cfg.lambda)?;
        Ok(ResolventSolver { op, cfg })
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn config(&self) -> &ResolventConfig {
        &self.cfg
    }

    pub fn solve(&self, f: &Field) -> Result<(Field, ResolventReport)> {
        self.op.check_grid(f)?;
        if f.values().iter().any(|v| !v.is_finite()) {
            return Err(invalid("right-hand side contains non-finite values"));
        }
        let grid = self.op.grid;
        let fv = f.values();
        let scale = {
            let l1 = f.l1();
            if l1 > 0.0 {
                l1
            } else {
                1.0
            }
        };
        let tol = self.cfg.newton_tol;
        let lin_tol = 0.01 * tol;

        let mut u = fv.to_vec();
        let mut r = self.op.residual_values(&u, fv);
        let mut norm = l1_of(&grid, &r);
        let mut history = vec![norm / scale];
        let mut iterations = 0;
        let converged = |u: &[f64], norm: f64| norm <= (tol * scale).max(self.op.roundoff_floor(u));

        let mut done = converged(&u, norm);
        while !done && iterations < self.cfg.newton_max {
            let jac = self.op.jacobian(&u);
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let (delta, _) = jac.solve(&rhs, lin_tol, LINEAR_MAX_ITER);
            let merit = l2sq_of(&r);
            let mut step = 1.0;
            let mut accepted = None;
            while step >= DAMPING_FLOOR {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(u, d)| u + step * d).collect();
                let r_trial = self.op.residual_values(&trial, fv);
                let m_trial = l2sq_of(&r_trial);
                if m_trial.is_finite() && m_trial <= (1.0 - 2.0 * ARMIJO * step) * merit {
                    accepted = Some((trial, r_trial));
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((trial, r_trial)) => {
                    u = trial;
                    r = r_trial;
                    norm = l1_of(&grid, &r);
                    history.push(norm / scale);
                    done = converged(&u, norm);
                }
                None => break,
            }
        }

        let mut used_fallback = false;
        if !done && self.cfg.picard_fallback {
            used_fallback = true;
            for _ in 0..PICARD_MAX_ITER {
                let a = self.op.picard_matrix(&u);
                let (next, _) = a.solve(fv, lin_tol, LINEAR_MAX_ITER);
                u = next;
                r = self.op.residual_values(&u, fv);
                norm = l1_of(&grid, &r);
                history.push(norm / scale);
                iterations += 1;
                if !norm.is_finite() {
                    break;
                }
                if converged(&u, norm) {
                    done = true;
                    break;
                }
            }
        }

        if !done {
            return Err(Error::NonConvergence { iterations, history });
        }
        let u = Field::from_values(grid, u)?;
        let report = ResolventReport {
            iterations,
            final_residual: norm / scale,
            used_fallback,
            mass_in: f.mass(),
            mass_out: u.mass(),
        };
        Ok((u, report))
    }
}

/// `u + λ A_h(u)` for the regularized profile.
pub fn apply_discrete_operator(u: &Field, profile: &RegularizedProfile, lambda: f64) -> Result<Field> {
    DiscreteOperator::new(*u.grid(), profile.clone(), lambda)?.apply(u)
}

/// `J_λ f`.
pub fn solve_resolvent(f: &Field, profile: &Profile, cfg: &ResolventConfig) -> Result<(Field, ResolventReport)> {
    ResolventSolver::new(*f.grid(), profile, *cfg)?.solve(f)
}

/// `|J_{λ₂} f - J_{λ₁}(λ₁/λ₂ f + (1 - λ₁/λ₂) J_{λ₂} f)|_1`.
pub fn check_resolvent_identity(
    f: &Field,
    profile: &Profile,
    lambda1: f64,
    lambda2: f64,
    cfg: &ResolventConfig,
) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(invalid("resolvent parameters must be positive"));
    }
    let j2 = solve_resolvent(f, profile, &ResolventConfig { lambda: lambda2, ..*cfg })?.0;
    let ratio = lambda1 / lambda2;
    let inner = f.lin_comb(ratio, 1.0 - ratio, &j2)?;
    let j1 = solve_resolvent(&inner, profile, &ResolventConfig { lambda: lambda1, ..*cfg })?.0;
    j2.l1_distance(&j1)
}

/// `|J^ε_λ f - J^0_λ f|_1` for each ε in `eps_list`.
pub fn eps_convergence_study(
    f: &Field,
    profile: &Profile,
    lambda: f64,
    eps_list: &[f64],
    cfg: &ResolventConfig,
) -> Result<Vec<(f64, f64)>> {
    if eps_list.iter().any(|e| !(*e >= 1e-6)) {
        return Err(invalid("eps values must be >= 1e-6"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("eps_list must be strictly decreasing"));
    }
    if !profile.beta().is_strictly_increasing() {
        return Err(invalid("the eps study requires a strictly increasing beta"));
    }
    let base = ResolventConfig { lambda, eps: 0.0, ..*cfg };
    let reference = solve_resolvent(f, profile, &base)?.0;
    eps_list
        .par_iter()
        .map(|&eps| {
            let u = solve_resolvent(f, profile, &ResolventConfig { eps, ..base })?.0;
            Ok((eps, u.l1_distance(&reference)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_solve;
    use crate::profiles::{Beta, Mobility};

    fn grid1(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, l, n).unwrap()
    }

    fn gaussian(grid: GridSpec, center: f64, width: f64) -> Field {
        let d = grid.d() as i32;
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|v| (v - center) * (v - center)).sum();
            (-r2 / (2.0 * width * width)).exp() / (2.0 * std::f64::consts::PI * width * width).powf(d as f64 / 2.0)
        })
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn field(&mut self, grid: GridSpec, support: f64) -> Field {
            let mut f = Field::from_fn(grid, |_| 0.0);
            for (i, v) in f.values_mut().iter_mut().enumerate() {
                let x = grid.center(i);
                if x[..grid.d()].iter().all(|c| c.abs() < support) {
                    *v = self.next();
                }
            }
            let m = f.mass();
            f.scaled(1.0 / m)
        }
    }

    /// Dense `I - λ Δ_h` with zero-flux faces, written out independently.
    fn dense_heat_matrix(n: usize, h: f64, lambda: f64, c: f64) -> Vec<Vec<f64>> {
        let k = lambda * c / (h * h);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 1.0;
            if i > 0 {
                a[i][i] += k;
                a[i][i - 1] = -k;
            }
            if i + 1 < n {
                a[i][i] += k;
                a[i][i + 1] = -k;
            }
        }
        a
    }

    #[test]
    fn zero_maps_to_zero() {
        for p in [Profile::heat(), Profile::porous_medium(2.0).unwrap()] {
            let u = Field::zeros(grid1(16, 1.0));
            let out = apply_discrete_operator(&u, &p.regularized(0.0).unwrap(), 0.3).unwrap();
            assert!(out.values().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn linear_operator_matches_dense_matrix() {
        let g = grid1(16, 1.0);
        let u = gaussian(g, 0.2, 0.3);
        let lambda = 0.05;
        let out = apply_discrete_operator(&u, &Profile::heat().regularized(0.0).unwrap(), lambda).unwrap();
        let a = dense_heat_matrix(16, g.h(), lambda, 1.0);
        for i in 0..16 {
            let r: f64 = a[i].iter().zip(u.values()).map(|(a, b)| a * b).sum();
            assert!((out.values()[i] - r).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_is_fixed_without_drift() {
        let g = GridSpec::new(2, 1.0, 8).unwrap();
        let u = Field::from_fn(g, |_| 0.7);
        let out =
            apply_discrete_operator(&u, &Profile::porous_medium(3.0).unwrap().regularized(0.0).unwrap(), 0.4).unwrap();
        for v in out.values() {
            assert!((v - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let g = grid1(32, 2.0);
        let (u, rep) = solve_resolvent(
            &Field::zeros(g),
            &Profile::porous_medium(2.0).unwrap(),
            &ResolventConfig::with_lambda(0.5),
        )
        .unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn grid_delta_reproduces_green_function() {
        let l = 20.0;
        let n = 800;
        let g = grid1(n, l);
        let h = g.h();
        let f = Field::deposit_mass(g, &[(vec![0.0], 1.0)]).unwrap();
        let (u, _) = solve_resolvent(&f, &Profile::heat(), &ResolventConfig::with_lambda(1.0)).unwrap();
        let exact = Field::from_fn(g, |x| 0.5 * (-x[0].abs()).exp());
        let rel = u.l1_distance(&exact).unwrap() / exact.l1();
        assert!(rel < 2.0 * h, "relative error {rel} vs 2h = {}", 2.0 * h);
    }

    #[test]
    fn mass_is_conserved_for_nonnegative_data() {
        let g = grid1(128, 4.0);
        let mut rng = Lcg(5);
        let profiles = [
            Profile::porous_medium(2.0).unwrap(),
            Profile::new(Beta::porous_medium(2.0), Mobility::Lorentzian, Drift::Constant { velocity: vec![0.8] })
                .unwrap(),
            Profile::new(
                Beta::Threshold { theta: 0.2 },
                Mobility::Constant { value: 1.0 },
                Drift::Confining { radius: 2.0 },
            )
            .unwrap(),
        ];
        for p in &profiles {
            let f = rng.field(g, 2.0);
            let (u, rep) = solve_resolvent(&f, p, &ResolventConfig::with_lambda(0.05)).unwrap();
            assert!(((rep.mass_out - rep.mass_in) / rep.mass_in).abs() < 1e-12);
            assert!(u.min() >= -1e-12 * f.linf());
            assert!(rep.final_residual <= 1e-12 || rep.final_residual < 1e-11);
        }
    }

    #[test]
    fn identity_trivial_when_parameters_agree() {
        let g = grid1(64, 3.0);
        let f = gaussian(g, 0.0, 0.5);
        let cfg = ResolventConfig::default();
        let v = check_resolvent_identity(&f, &Profile::porous_medium(2.0).unwrap(), 0.2, 0.2, &cfg).unwrap();
        assert!(v <= 10.0 * cfg.newton_tol * f.l1());
    }

    #[test]
    fn identity_linear_case_against_dense() {
        let g = grid1(64, 3.0);
        let h = g.h();
        let f = gaussian(g, 0.3, 0.4);
        let (l1, l2) = (0.1, 0.5);
        let defect = check_resolvent_identity(&f, &Profile::heat(), l1, l2, &ResolventConfig::default()).unwrap();
        assert!(defect <= 1e-10, "{defect}");
        // dense route
        let j2 = dense_solve(dense_heat_matrix(64, h, l2, 1.0), f.values().to_vec());
        let ratio = l1 / l2;
        let inner: Vec<f64> = f.values().iter().zip(&j2).map(|(f, j)| ratio * f + (1.0 - ratio) * j).collect();
        let j1 = dense_solve(dense_heat_matrix(64, h, l1, 1.0), inner);
        let dense_defect: f64 = j1.iter().zip(&j2).map(|(a, b)| (a - b).abs()).sum::<f64>() * h;
        assert!(dense_defect <= 1e-10);
    }

    #[test]
    fn identity_porous_medium() {
        let g = grid1(256, 4.0);
        let f = gaussian(g, 0.0, 0.5);
        let cfg = ResolventConfig::default();
        let v = check_resolvent_identity(&f, &Profile::porous_medium(2.0).unwrap(), 0.1, 0.5, &cfg).unwrap();
        assert!(v <= 10.0 * cfg.newton_tol * f.l1(), "{v}");
    }

    #[test]
    fn eps_study_linear_case_is_first_order() {
        let g = grid1(128, 4.0);
        let f = gaussian(g, 0.0, 0.5);
        let eps = [1e-1, 1e-2, 1e-3];
        let study = eps_convergence_study(&f, &Profile::heat(), 0.2, &eps, &ResolventConfig::default()).unwrap();
        // independent dense route: β̃_ε(r) = r/(1+ε) + εr, so the linear system is
        // (1 + λε c) u - λ c Δ_h u = f with c = 1/(1+ε) + ε
        let h = g.h();
        let reference = dense_solve(dense_heat_matrix(128, h, 0.2, 1.0), f.values().to_vec());
        for &(e, dist) in &study {
            let c = 1.0 / (1.0 + e) + e;
            let mut a = dense_heat_matrix(128, h, 0.2, c);
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += 0.2 * e * c;
            }
            let u = dense_solve(a, f.values().to_vec());
            let dense_dist: f64 = u.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum::<f64>() * h;
            assert!((dist - dense_dist).abs() < 1e-10 + 1e-6 * dense_dist);
        }
        let r1 = study[0].1 / study[1].1;
        let r2 = study[1].1 / study[2].1;
        assert!((5.0..20.0).contains(&r1) && (8.0..12.0).contains(&r2), "{r1} {r2}");
    }

    #[test]
    fn eps_study_zero_data_and_porous_monotone() {
        let g = grid1(128, 4.0);
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        let p = Profile::porous_medium(2.0).unwrap();
        let zero = eps_convergence_study(&Field::zeros(g), &p, 0.2, &eps, &ResolventConfig::default()).unwrap();
        assert!(zero.iter().all(|(_, d)| *d == 0.0));
        let f = gaussian(g, 0.0, 0.5);
        let study = eps_convergence_study(&f, &p, 0.2, &eps, &ResolventConfig::default()).unwrap();
        for w in study.windows(2) {
            assert!(w[1].1 < w[0].1, "{study:?}");
        }
    }

    fn contraction_profiles() -> Vec<Profile> {
        vec![
            Profile::porous_medium(2.0).unwrap(),
            Profile::porous_medium(3.0).unwrap(),
            Profile::new(Beta::porous_medium(2.0), Mobility::Lorentzian, Drift::Constant { velocity: vec![1.5] })
                .unwrap(),
            Profile::new(Beta::Linear, Mobility::Constant { value: 1.0 }, Drift::Confining { radius: 1.0 }).unwrap(),
        ]
    }

    #[test]
    fn discrete_l1_contraction() {
        let g = grid1(64, 3.0);
        let mut rng = Lcg(99);
        let cfg = ResolventConfig::with_lambda(0.3);
        for p in contraction_profiles() {
            for _ in 0..50 {
                let f = rng.field(g, 2.0).scaled(1.0 + 2.0 * rng.next());
                let fb = rng.field(g, 2.0);
                let u = solve_resolvent(&f, &p, &cfg).unwrap().0;
                let ub = solve_resolvent(&fb, &p, &cfg).unwrap().0;
                let lhs = u.l1_distance(&ub).unwrap();
                let rhs = f.l1_distance(&fb).unwrap();
                assert!(lhs <= rhs + 10.0 * cfg.newton_tol * (f.l1() + fb.l1()), "{lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn discrete_linf_and_lp_bounds() {
        let g = grid1(128, 4.0);
        let mut rng = Lcg(3);
        let cfg = ResolventConfig::with_lambda(0.1);
        let slack = 10.0 * cfg.newton_tol;
        let no_drift = Profile::porous_medium(2.0).unwrap();
        let drifted = Profile::new(
            Beta::porous_medium(2.0),
            Mobility::Constant { value: 1.0 },
            Drift::Constant { velocity: vec![1.0] },
        )
        .unwrap();
        assert!(cfg.lambda < drifted.lambda0(1));
        for _ in 0..10 {
            let f = rng.field(g, 2.0);
            let u = solve_resolvent(&f, &no_drift, &cfg).unwrap().0;
            assert!(u.linf() <= f.linf() + slack);
            for p in [2.0, 4.0, 8.0, f64::INFINITY] {
                assert!(u.norm_p(p).unwrap() <= f.norm_p(p).unwrap() + slack);
            }
            let v = solve_resolvent(&f, &drifted, &cfg).unwrap().0;
            let m = drifted.m_drift(1);
            assert!(v.linf() <= (1.0 + m.sqrt()) * f.linf() + slack);
        }
    }

    #[test]
    fn order_preservation() {
        let g = grid1(64, 3.0);
        let mut rng = Lcg(1234);
        let cfg = ResolventConfig::with_lambda(0.2);
        for p in contraction_profiles() {
            for _ in 0..10 {
                let f = rng.field(g, 2.0);
                let bump = rng.field(g, 2.5);
                let fb = f.lin_comb(1.0, 1.0, &bump).unwrap();
                let u = solve_resolvent(&f, &p, &cfg).unwrap().0;
                let ub = solve_resolvent(&fb, &p, &cfg).unwrap().0;
                for (a, b) in u.values().iter().zip(ub.values()) {
                    assert!(*a <= b + 10.0 * cfg.newton_tol);
                }
            }
        }
    }

    #[test]
    fn picard_fallback_agrees_with_newton() {
        let g = grid1(64, 3.0);
        let f = gaussian(g, 0.1, 0.4);
        let p = Profile::new(Beta::porous_medium(2.0), Mobility::Lorentzian, Drift::Constant { velocity: vec![-1.0] })
            .unwrap();
        let newton = solve_resolvent(&f, &p, &ResolventConfig::with_lambda(0.1)).unwrap();
        let cfg = ResolventConfig { newton_max: 0, ..ResolventConfig::with_lambda(0.1) };
        let picard = solve_resolvent(&f, &p, &cfg).unwrap();
        assert!(picard.1.used_fallback);
        assert!(!newton.1.used_fallback);
        assert!(newton.0.l1_distance(&picard.0).unwrap() < 1e-10);
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = grid1(64, 3.0);
        let f = gaussian(g, 0.1, 0.4);
        let cfg = ResolventConfig { newton_max: 1, picard_fallback: false, ..ResolventConfig::with_lambda(5.0) };
        let err = solve_resolvent(&f, &Profile::porous_medium(3.0).unwrap(), &cfg).unwrap_err();
        match err {
            Error::NonConvergence { history, .. } => assert!(!history.is_empty()),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn multidimensional_solves_conserve_mass_and_positivity() {
        let g2 = GridSpec::new(2, 3.0, 32).unwrap();
        let g3 = GridSpec::new(3, 3.0, 12).unwrap();
        let p2 =
            Profile::new(Beta::porous_medium(2.0), Mobility::Lorentzian, Drift::Constant { velocity: vec![0.5, -0.3] })
                .unwrap();
        let p3 =
            Profile::new(Beta::porous_medium(2.0), Mobility::Constant { value: 1.0 }, Drift::Confining { radius: 1.5 })
                .unwrap();
        for (g, p) in [(g2, p2), (g3, p3)] {
            let f = gaussian(g, 0.2, 0.6);
            let cfg = ResolventConfig::with_lambda(0.05);
            let (u, rep) = solve_resolvent(&f, &p, &cfg).unwrap();
            assert!(((rep.mass_out - rep.mass_in) / rep.mass_in).abs() < 1e-12, "{rep:?}");
            assert!(u.min() >= -1e-12 * f.linf());
            let lhs = DiscreteOperator::new(g, p.regularized(0.0).unwrap(), cfg.lambda).unwrap().apply(&u).unwrap();
            assert!(lhs.l1_distance(&f).unwrap() <= 1e-11 * f.l1());
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = GridSpec::new(2, 2.0, 6).unwrap();
        let p =
            Profile::new(Beta::porous_medium(2.0), Mobility::Lorentzian, Drift::Constant { velocity: vec![0.7, -1.1] })
                .unwrap();
        let op = DiscreteOperator::new(g, p.regularized(0.0).unwrap(), 0.3).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|i| 0.2 + ((i * 37) % 11) as f64 * 0.25).collect();
        let dense = op.jacobian(&u).to_dense();
        let base = op.apply_values(&u);
        let step = 1e-6;
        for j in 0..g.len() {
            let mut up = u.clone();
            up[j] += step;
            let mut dn = u.clone();
            dn[j] -= step;
            let (a, b) = (op.apply_values(&up), op.apply_values(&dn));
            for i in 0..g.len() {
                let fd = (a[i] - b[i]) / (2.0 * step);
                assert!((fd - dense[i][j]).abs() < 1e-6 * (1.0 + fd.abs()), "({i},{j}) {fd} vs {}", dense[i][j]);
            }
        }
        assert_eq!(base.len(), g.len());
    }
}
