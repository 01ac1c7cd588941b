//! Closed-form reference solutions: the porous-medium source solution, the
//! drifted heat kernel, and the Green function of `I - λ ∂²` on the line.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, GridSpec};
use crate::quad;

/// Surface area of the unit sphere in ℝ^d for d = 1, 2, 3.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Self-similar source solution of `u_t = Δ(u^m)`:
/// `t^{-k} (C - κ|x|² t^{-2k/d})_+^{1/(m-1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barenblatt {
    d: usize,
    m: f64,
    mass: f64,
    k: f64,
    kappa: f64,
    c: f64,
}

impl Barenblatt {
    pub fn new(d: usize, m: f64, mass: f64) -> Result<Barenblatt> {
        if !(1..=3).contains(&d) {
            return Err(invalid(format!("dimension {d} not in 1..=3")));
        }
        if !(m > 1.0 && m.is_finite()) {
            return Err(invalid(format!("source solution needs m > 1, got {m}")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("mass must be positive, got {mass}")));
        }
        let df = d as f64;
        let k = df / (df * (m - 1.0) + 2.0);
        let kappa = k * (m - 1.0) / (2.0 * m * df);
        let mut b = Barenblatt { d, m, mass, k, kappa, c: 1.0 };
        b.c = b.solve_constant()?;
        Ok(b)
    }

    /// Mass of the profile `(C - κ|y|²)_+^{1/(m-1)}` by radial quadrature,
    /// with `r = R sin θ` to absorb the edge singularity.
    pub fn profile_mass(&self, c: f64) -> f64 {
        let radius = (c / self.kappa).sqrt();
        let p = 1.0 / (self.m - 1.0);
        let d = self.d as i32;
        let integral =
            quad::integrate(|th: f64| th.sin().powi(d - 1) * th.cos().powf(2.0 * p + 1.0), 0.0, 0.5 * PI, 64);
        sphere_area(self.d) * radius.powi(d) * c.powf(p) * integral
    }

    fn solve_constant(&self) -> Result<f64> {
        let f = |c: f64| self.profile_mass(c) - self.mass;
        let (mut lo, mut hi) = (1.0, 1.0);
        let mut guard = 0;
        while f(lo) > 0.0 {
            lo *= 0.5;
            guard += 1;
            if guard > 400 {
                return Err(Error::ScalarRoot { r: self.mass });
            }
        }
        while f(hi) < 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 400 {
                return Err(Error::ScalarRoot { r: self.mass });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let c = 0.5 * (lo + hi);
        if (f(c) / self.mass).abs() > 1e-10 {
            return Err(Error::ScalarRoot { r: self.mass });
        }
        Ok(c)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Decay exponent `k = d / (d(m-1) + 2)`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// `κ = k(m-1)/(2md)`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Normalization constant `C`.
    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.kappa).sqrt() * t.powf(self.k / self.d as f64)
    }

    pub fn peak(&self, t: f64) -> f64 {
        self.c.powf(1.0 / (self.m - 1.0)) * t.powf(-self.k)
    }

    pub fn density(&self, t: f64, x: &[f64]) -> f64 {
        let s = t.powf(-2.0 * self.k / self.d as f64);
        let q = self.c - self.kappa * norm2(x) * s;
        if q <= 0.0 {
            0.0
        } else {
            t.powf(-self.k) * q.powf(1.0 / (self.m - 1.0))
        }
    }
}

/// `barenblatt(d, m, mass, t, x)` as a free function.
pub fn barenblatt(d: usize, m: f64, mass: f64, t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    if x.len() != d {
        return Err(Error::GridMismatch(format!("point has {} coordinates, d = {d}", x.len())));
    }
    Ok(Barenblatt::new(d, m, mass)?.density(t, x))
}

/// `(4πt)^{-d/2} exp(-|x - c t|² / 4t)`, the fundamental solution of
/// `u_t = Δu - c·∇u`.
pub fn heat_kernel(d: usize, t: f64, x: &[f64], drift: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    if x.len() != d || (!drift.is_empty() && drift.len() != d) {
        return Err(Error::GridMismatch(format!("point/drift dimension does not match d = {d}")));
    }
    let r2: f64 = x
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let c = drift.get(i).copied().unwrap_or(0.0);
            (xi - c * t).powi(2)
        })
        .sum();
    Ok((4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// `e^{-|x|/√λ} / (2√λ)`.
pub fn linear_resolvent_kernel_1d(lambda: f64, x: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let s = lambda.sqrt();
    Ok((-x.abs() / s).exp() / (2.0 * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Barenblatt,
    Heat,
    DriftedHeat,
    LinearResolventKernel,
}

/// One of the reference solutions with its parameters fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSolution {
    Barenblatt(Barenblatt),
    Heat { d: usize, drift: Vec<f64> },
    LinearResolventKernel { lambda: f64 },
}

impl OracleSolution {
    pub fn kind(&self) -> OracleKind {
        match self {
            OracleSolution::Barenblatt(_) => OracleKind::Barenblatt,
            OracleSolution::Heat { drift, .. } if drift.iter().any(|c| *c != 0.0) => OracleKind::DriftedHeat,
            OracleSolution::Heat { .. } => OracleKind::Heat,
            OracleSolution::LinearResolventKernel { .. } => OracleKind::LinearResolventKernel,
        }
    }

    pub fn params(&self) -> Vec<(String, f64)> {
        match self {
            OracleSolution::Barenblatt(b) => {
                vec![("d".into(), b.d as f64), ("m".into(), b.m), ("mass".into(), b.mass), ("C".into(), b.c)]
            }
            OracleSolution::Heat { d, drift } => {
                let mut p = vec![("d".into(), *d as f64)];
                p.extend(drift.iter().enumerate().map(|(i, c)| (format!("drift{i}"), *c)));
                p
            }
            OracleSolution::LinearResolventKernel { lambda } => vec![("lambda".into(), *lambda)],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OracleSolution::Barenblatt(b) => b.d,
            OracleSolution::Heat { d, .. } => *d,
            OracleSolution::LinearResolventKernel { .. } => 1,
        }
    }

    /// Density at `(t, x)`; the resolvent kernel ignores `t`.
    pub fn density(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            OracleSolution::Barenblatt(b) => b.density(t, x),
            OracleSolution::Heat { d, drift } => heat_kernel(*d, t, x, drift).unwrap_or(f64::NAN),
            OracleSolution::LinearResolventKernel { lambda } => {
                linear_resolvent_kernel_1d(*lambda, x[0]).unwrap_or(f64::NAN)
            }
        }
    }

    /// Cell averages at time `t` by tensor Gauss quadrature with `panels`
    /// eight-point panels per axis and cell.
    pub fn cell_averages(&self, grid: GridSpec, t: f64, panels: usize) -> Result<Field> {
        if grid.d() != self.dim() {
            return Err(Error::GridMismatch(format!("oracle is {}-dimensional, grid is {}", self.dim(), grid.d())));
        }
        if panels == 0 {
            return Err(invalid("panels must be >= 1"));
        }
        let (x, w) = quad::gl8();
        let h = grid.h();
        let width = h / panels as f64;
        // offsets and weights of the 1-d rule over one cell, relative to its center
        let mut offsets = Vec::with_capacity(8 * panels);
        let mut weights = Vec::with_capacity(8 * panels);
        for p in 0..panels {
            let mid = -0.5 * h + (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(w) {
                offsets.push(mid + 0.5 * width * xi);
                weights.push(0.5 * wi / panels as f64);
            }
        }
        let q = offsets.len();
        let d = grid.d();
        let total = q.pow(d as u32);
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let c = grid.center(i);
                let mut acc = 0.0;
                for j in 0..total {
                    let mut point = [0.0; 3];
                    let mut wt = 1.0;
                    let mut rest = j;
                    for k in 0..d {
                        let a = rest % q;
                        rest /= q;
                        point[k] = c[k] + offsets[a];
                        wt *= weights[a];
                    }
                    acc += wt * self.density(t, &point[..d]);
                }
                acc
            })
            .collect();
        Field::from_values(grid, values)
    }
}
