//! Exponent algebra behind the L¹-L∞ smoothing estimate
//! `|u(t)|_∞ ≤ C t^{-d/(2+(α-1)d)} |u0|_1^{2/(2+(α-1)d)}`, the Moser exponent
//! sequence, and decay-rate extraction from trajectories.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::semigroup::Trajectory;

/// Minimum number of samples for a decay-rate fit.
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub d: usize,
    pub alpha: f64,
    pub p0: f64,
}

impl SmoothingParams {
    /// Requires `α > 1 - 2/d` and `p0 > 1`.
    pub fn new(d: usize, alpha: f64, p0: f64) -> Result<SmoothingParams> {
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(alpha > 1.0 - 2.0 / d as f64) || !alpha.is_finite() {
            return Err(invalid(format!("alpha = {alpha} must exceed 1 - 2/d = {}", 1.0 - 2.0 / d as f64)));
        }
        if !(p0 > 1.0) || !p0.is_finite() {
            return Err(invalid(format!("p0 = {p0} must exceed 1")));
        }
        Ok(SmoothingParams { d, alpha, p0 })
    }

    /// The PDE theory excludes d = 2; the algebra is still valid there.
    pub fn dimension_warning(&self) -> Option<&'static str> {
        (self.d == 2).then_some("d = 2 is outside the regime of the smoothing theory; algebraic identities only")
    }

    fn df(&self) -> f64 {
        self.d as f64
    }

    fn denominator(&self) -> f64 {
        (self.p0 + self.alpha - 2.0) * self.df() + 2.0
    }
}

/// `(d/(2+(α-1)d), 2/(2+(α-1)d))`.
pub fn smoothing_exponents(d: usize, alpha: f64) -> Result<(f64, f64)> {
    let den = 2.0 + (alpha - 1.0) * d as f64;
    if !(den > 0.0) || !den.is_finite() {
        return Err(invalid(format!("2 + (alpha-1)d = {den} must be positive")));
    }
    Ok((d as f64 / den, 2.0 / den))
}

/// `γ = (2p0 + (α-1)d) / ((p0+α-2)d + 2)`.
pub fn gamma_exponent(params: &SmoothingParams) -> f64 {
    (2.0 * params.p0 + (params.alpha - 1.0) * params.df()) / params.denominator()
}

/// The same exponent written as `1 - (p0-1)(d-2)/((p0+α-2)d + 2)`.
pub fn gamma_exponent_alternative(params: &SmoothingParams) -> f64 {
    1.0 - (params.p0 - 1.0) * (params.df() - 2.0) / params.denominator()
}

/// `C_{α,d} = (d+2)/(2d) + sqrt((α-1)(α+2/d) + ((d+2)/(2d))²)`.
pub fn c_alpha_d(alpha: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let df = d as f64;
    if !(alpha > 1.0 - 2.0 / df) {
        return Err(invalid(format!("alpha = {alpha} must exceed 1 - 2/d")));
    }
    let a = (df + 2.0) / (2.0 * df);
    let disc = (alpha - 1.0) * (alpha + 2.0 / df) + a * a;
    Ok(a + disc.sqrt())
}

/// `p_{n+1} = d/(d-2) (p_n + α - 1)`, starting from `p0`.
pub fn moser_sequence(p0: f64, alpha: f64, d: usize, n_terms: usize) -> Result<Vec<f64>> {
    if d < 3 {
        return Err(invalid(format!("the Moser recursion needs d >= 3, got {d}")));
    }
    let factor = d as f64 / (d as f64 - 2.0);
    let mut seq = Vec::with_capacity(n_terms);
    let mut p = p0;
    for _ in 0..n_terms {
        seq.push(p);
        p = factor * (p + alpha - 1.0);
    }
    Ok(seq)
}

/// Residuals of the two exponent identities
///
/// ```text
/// p0 - γ = (p0-1)(p0+α-1) d / ((p0+α-2)d + 2)
/// 2γ(p0+α-1) / ((γ+α-1)(2p0+(α-1)d)) = 2 / (2+(α-1)d)
/// ```
pub fn exponent_identities(params: &SmoothingParams) -> (f64, f64) {
    let g = gamma_exponent(params);
    let (p0, a, d) = (params.p0, params.alpha, params.df());
    let res_j = ((p0 - g) - (p0 - 1.0) * (p0 + a - 1.0) * d / params.denominator()).abs();
    let lhs = mass_power_left(params);
    let rhs = 2.0 / (2.0 + (a - 1.0) * d);
    (res_j, (lhs - rhs).abs())
}

/// Left side of the second identity, which must equal the mass power.
pub fn mass_power_left(params: &SmoothingParams) -> f64 {
    let g = gamma_exponent(params);
    let (p0, a, d) = (params.p0, params.alpha, params.df());
    2.0 * g * (p0 + a - 1.0) / ((g + a - 1.0) * (2.0 * p0 + (a - 1.0) * d))
}

/// `(γ - p0)/(γ + α - 1)`; exceeds -1 whenever `p0 < C_{α,d}`.
pub fn gamma_shift_ratio(params: &SmoothingParams) -> f64 {
    let g = gamma_exponent(params);
    (g - params.p0) / (g + params.alpha - 1.0)
}

/// Admissible parameters for the algebra sweeps: `d ∈ {3,..,6}`,
/// `α ∈ [1, 5)`, `p0 ∈ (1, C_{α,d})`, drawn from a seeded stream.
pub fn admissible_sweep(count: usize, seed: u64) -> Vec<SmoothingParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    (0..count)
        .map(|_| {
            let d = 3 + (unit() * 4.0) as usize;
            let alpha = 1.0 + 4.0 * unit();
            let c = c_alpha_d(alpha, d).expect("alpha >= 1 is admissible");
            let p0 = 1.0 + (c - 1.0) * unit();
            SmoothingParams { d, alpha, p0 }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares line through `(ln t, ln v)`.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|(t, v)| *t > 0.0 && *v > 0.0).map(|(t, v)| (t.ln(), v.ln())).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_FIT_SAMPLES, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("all sample times coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * n { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit { slope, intercept, r_squared, samples: pts.len() })
}

/// Default fit window `[10 dt, T/2]`.
pub fn default_window(traj: &Trajectory) -> (f64, f64) {
    (10.0 * traj.dt, 0.5 * traj.final_time())
}

/// Fit of `ln |u(t)|_∞` against `ln t` over the per-step diagnostics inside `window`.
pub fn fit_decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("window ({lo}, {hi}) must satisfy 0 < t_min < t_max")));
    }
    let samples: Vec<(f64, f64)> = traj
        .diagnostics
        .iter()
        .filter(|d| d.t >= lo * (1.0 - 1e-12) && d.t <= hi * (1.0 + 1e-12))
        .map(|d| (d.t, d.linf))
        .collect();
    fit_power_law(&samples)
}
