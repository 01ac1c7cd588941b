//! Coefficient profiles: the diffusion nonlinearity β, the mobility b, the
//! drift field D, and their ε-regularized surrogates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Hypothesis, Result};
use crate::quad;

/// Width of the cubic ramp that switches off the drift beyond radius 1/ε.
/// The smoothstep has peak slope 1.5/width, so a width of 2 keeps |∇η| ≤ 3/4.
pub const CUTOFF_RAMP_WIDTH: f64 = 2.0;

/// Width of the ramp in the confining drift `D(x) = -x χ(|x|)`.
pub const CONFINING_RAMP_WIDTH: f64 = 1.0;

const ROOT_TOL: f64 = 1e-13;
const ROOT_MAX_ITER: usize = 400;

/// Diffusion nonlinearity β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Beta {
    /// β(r) = r.
    Linear,
    /// β(r) = a |r|^{m-1} r.
    PorousMedium {
        #[serde(default = "one")]
        a: f64,
        m: f64,
    },
    /// β(r) = sign(r) (|r| - θ)₊², flat on [-θ, θ].
    Threshold { theta: f64 },
}

fn one() -> f64 {
    1.0
}

impl Beta {
    pub fn porous_medium(m: f64) -> Beta {
        Beta::PorousMedium { a: 1.0, m }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Beta::Linear => r,
            Beta::PorousMedium { a, m } => {
                if m == 1.0 {
                    a * r
                } else if m == 2.0 {
                    a * r.abs() * r
                } else {
                    a * r.abs().powf(m - 1.0) * r
                }
            }
            Beta::Threshold { theta } => {
                let e = (r.abs() - theta).max(0.0);
                r.signum() * e * e
            }
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Beta::Linear => 1.0,
            Beta::PorousMedium { a, m } => {
                if m == 1.0 {
                    a
                } else if m == 2.0 {
                    2.0 * a * r.abs()
                } else {
                    a * m * r.abs().powf(m - 1.0)
                }
            }
            Beta::Threshold { theta } => 2.0 * (r.abs() - theta).max(0.0),
        }
    }

    /// β(u)/u, extended by its limit at u = 0.
    pub fn ratio(&self, u: f64) -> f64 {
        match *self {
            Beta::Linear => 1.0,
            Beta::PorousMedium { a, m } => a * u.abs().powf(m - 1.0),
            Beta::Threshold { theta } => {
                if u == 0.0 {
                    0.0
                } else {
                    let e = (u.abs() - theta).max(0.0);
                    e * e / u.abs()
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::Hypothesis { hypothesis: Hypothesis::MonotoneBeta, reason });
        match *self {
            Beta::Linear => Ok(()),
            Beta::PorousMedium { a, m } => {
                if !(m >= 1.0 && m.is_finite()) {
                    return fail(format!("porous-medium exponent m = {m} must satisfy m >= 1"));
                }
                if !(a > 0.0 && a.is_finite()) {
                    return fail(format!("porous-medium coefficient a = {a} must be positive"));
                }
                Ok(())
            }
            Beta::Threshold { theta } => {
                if !(theta >= 0.0 && theta.is_finite()) {
                    return fail(format!("threshold theta = {theta} must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        match *self {
            Beta::Linear | Beta::PorousMedium { .. } => true,
            Beta::Threshold { theta } => theta == 0.0,
        }
    }

    /// Exponent α and constant a in `β'(r) >= a |r|^{α-1}`, when such a bound holds.
    pub fn degeneracy(&self) -> Option<(f64, f64)> {
        match *self {
            Beta::Linear => Some((1.0, 1.0)),
            Beta::PorousMedium { a, m } => Some((m, a * m)),
            Beta::Threshold { .. } => None,
        }
    }

    /// Exponent m and constant C in `|β(r)| <= C |r|^m`.
    pub fn growth(&self) -> (f64, f64) {
        match *self {
            Beta::Linear => (1.0, 1.0),
            Beta::PorousMedium { a, m } => (m, a),
            Beta::Threshold { .. } => (2.0, 1.0),
        }
    }
}

/// Mobility b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mobility {
    Constant {
        value: f64,
    },
    /// b(r) = 1/(1 + r²).
    Lorentzian,
}

impl Mobility {
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Mobility::Constant { value } => value,
            Mobility::Lorentzian => 1.0 / (1.0 + r * r),
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Mobility::Constant { .. } => 0.0,
            Mobility::Lorentzian => {
                let q = 1.0 + r * r;
                -2.0 * r / (q * q)
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Mobility::Constant { value } => value.abs(),
            Mobility::Lorentzian => 1.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Mobility::Constant { .. })
    }
}

/// Drift field D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    Constant {
        velocity: Vec<f64>,
    },
    /// D(x) = -x χ(|x|) with χ = 1 on the ball of the given radius, ramping to 0.
    Confining {
        radius: f64,
    },
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn smoothstep_prime(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        0.0
    } else {
        6.0 * s * (1.0 - s)
    }
}

fn confining_chi(radius: f64, r: f64) -> (f64, f64) {
    let s = (r - radius) / CONFINING_RAMP_WIDTH;
    (1.0 - smoothstep(s), -smoothstep_prime(s) / CONFINING_RAMP_WIDTH)
}

impl Drift {
    pub fn is_zero(&self) -> bool {
        match self {
            Drift::Zero => true,
            Drift::Constant { velocity } => velocity.iter().all(|&v| v == 0.0),
            Drift::Confining { .. } => false,
        }
    }

    /// Writes D(x) into `out` (same length as `x`).
    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Drift::Constant { velocity } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = velocity.get(k).copied().unwrap_or(0.0);
                }
            }
            Drift::Confining { radius } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let (chi, _) = confining_chi(*radius, r);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -xi * chi;
                }
            }
        }
    }

    pub fn divergence(&self, x: &[f64]) -> f64 {
        match self {
            Drift::Zero | Drift::Constant { .. } => 0.0,
            Drift::Confining { radius } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let (chi, dchi) = confining_chi(*radius, r);
                -(x.len() as f64) * chi - r * dchi
            }
        }
    }

    /// `|(div D)⁻ + |D||_∞` in dimension `d`.
    pub fn m_drift(&self, d: usize) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Constant { velocity } => velocity.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Drift::Confining { radius } => {
                let samples = 20_000;
                let top = radius + CONFINING_RAMP_WIDTH;
                let mut best: f64 = 0.0;
                for i in 0..=samples {
                    let r = top * i as f64 / samples as f64;
                    let (chi, dchi) = confining_chi(*radius, r);
                    let div_neg = (d as f64 * chi + r * dchi).max(0.0);
                    best = best.max(div_neg + r * chi);
                }
                best.max(d as f64 + radius)
            }
        }
    }

    /// Largest negative part of div D.
    pub fn div_negative_sup(&self, d: usize) -> f64 {
        match self {
            Drift::Zero | Drift::Constant { .. } => 0.0,
            Drift::Confining { .. } => d as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Drift::Zero => true,
            Drift::Constant { velocity } => {
                !velocity.is_empty() && velocity.len() <= 3 && velocity.iter().all(|v| v.is_finite())
            }
            Drift::Confining { radius } => *radius > 0.0 && radius.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Hypothesis { hypothesis: Hypothesis::BoundedDrift, reason: format!("{self:?}") })
        }
    }
}

/// The coefficient triple (β, b, D), validated against the structural hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    beta: Beta,
    mobility: Mobility,
    drift: Drift,
}

/// Default sampling grid for the monotonicity gate.
fn gate_samples() -> Vec<f64> {
    let mut s: Vec<f64> = (-2000..=2000).map(|i| i as f64 * 0.025).collect();
    s.extend((-40..=40).map(|i| 10f64.powf(i as f64 / 8.0)));
    s.extend((-40..=40).map(|i| -(10f64.powf(i as f64 / 8.0))));
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

impl Profile {
    pub fn new(beta: Beta, mobility: Mobility, drift: Drift) -> Result<Profile> {
        beta.validate()?;
        drift.validate()?;
        match mobility {
            Mobility::Constant { value } if !(value >= 0.0 && value.is_finite()) => {
                return Err(Error::Hypothesis {
                    hypothesis: Hypothesis::Mobility,
                    reason: format!("constant mobility {value} must be finite and nonnegative"),
                })
            }
            _ => {}
        }
        let profile = Profile { beta, mobility, drift };
        profile.check_monotone(&gate_samples())?;
        if !profile.mobility.is_constant() && !profile.beta_strictly_increasing_on(&gate_samples()) {
            return Err(Error::Hypothesis {
                hypothesis: Hypothesis::Mobility,
                reason: "non-constant b requires a strictly increasing beta".into(),
            });
        }
        Ok(profile)
    }

    /// β(r) = r, b ≡ 0, D ≡ 0.
    pub fn heat() -> Profile {
        Profile::new(Beta::Linear, Mobility::Constant { value: 0.0 }, Drift::Zero).unwrap()
    }

    /// β(r) = |r|^{m-1} r, b ≡ 1, D ≡ 0.
    pub fn porous_medium(m: f64) -> Result<Profile> {
        Profile::new(Beta::porous_medium(m), Mobility::Constant { value: 1.0 }, Drift::Zero)
    }

    /// Sampled check that β(0) = 0 and β is nondecreasing on `samples` (sorted ascending).
    pub fn check_monotone(&self, samples: &[f64]) -> Result<()> {
        if self.beta.value(0.0) != 0.0 {
            return Err(Error::Hypothesis { hypothesis: Hypothesis::MonotoneBeta, reason: "beta(0) != 0".into() });
        }
        for w in samples.windows(2) {
            if w[0] < w[1] && self.beta.value(w[0]) > self.beta.value(w[1]) {
                return Err(Error::Hypothesis {
                    hypothesis: Hypothesis::MonotoneBeta,
                    reason: format!("beta decreases between {} and {}", w[0], w[1]),
                });
            }
        }
        Ok(())
    }

    fn beta_strictly_increasing_on(&self, samples: &[f64]) -> bool {
        self.beta.is_strictly_increasing()
            && samples.windows(2).all(|w| !(w[0] < w[1]) || self.beta.value(w[0]) < self.beta.value(w[1]))
    }

    pub fn beta(&self) -> &Beta {
        &self.beta
    }

    pub fn mobility(&self) -> &Mobility {
        &self.mobility
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn alpha(&self) -> Option<f64> {
        self.beta.degeneracy().map(|(alpha, _)| alpha)
    }

    pub fn sup_b(&self) -> f64 {
        self.mobility.sup()
    }

    pub fn m_drift(&self, d: usize) -> f64 {
        self.drift.m_drift(d)
    }

    pub fn lambda0(&self, d: usize) -> f64 {
        lambda0(self.m_drift(d), self.sup_b())
    }

    /// Regularized surrogate with parameter `eps` (no drift cutoff).
    pub fn regularized(&self, eps: f64) -> Result<RegularizedProfile> {
        RegularizedProfile::new(self.clone(), eps)
    }
}

/// `(M + √M |b|_∞)^{-1}`, infinite when M = 0.
pub fn lambda0(m_drift: f64, sup_b: f64) -> f64 {
    if m_drift == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (m_drift + m_drift.sqrt() * sup_b)
    }
}

/// Solves `g + ε β(g) = r` by safeguarded Newton with bisection fallback.
/// Returns the root and whether the tolerance was met.
fn scalar_resolvent(beta: &Beta, eps: f64, r: f64) -> (f64, bool) {
    if r == 0.0 {
        return (0.0, true);
    }
    let tol = ROOT_TOL.max(4.0 * f64::EPSILON * r.abs());
    let (mut lo, mut hi) = if r > 0.0 { (0.0, r) } else { (r, 0.0) };
    let phi = |g: f64| g + eps * beta.value(g) - r;
    let mut g = (r / (1.0 + eps * beta.derivative(r))).clamp(lo, hi);
    for _ in 0..ROOT_MAX_ITER {
        let val = phi(g);
        if val == 0.0 {
            return (g, true);
        }
        if val > 0.0 {
            hi = g;
        } else {
            lo = g;
        }
        let slope = 1.0 + eps * beta.derivative(g);
        let mut next = g - val / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - g).abs() <= tol || hi - lo <= tol {
            return (next, true);
        }
        g = next;
    }
    (g, false)
}

/// The regularized coefficients β̃_ε, b_ε, D_ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizedProfile {
    base: Profile,
    eps: f64,
    cutoff: bool,
}

impl RegularizedProfile {
    pub fn new(base: Profile, eps: f64) -> Result<RegularizedProfile> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid(format!("regularization eps = {eps} must be finite and >= 0")));
        }
        Ok(RegularizedProfile { base, eps, cutoff: false })
    }

    /// Enables the drift cutoff η_ε beyond radius 1/ε.
    pub fn with_cutoff(mut self, cutoff: bool) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn base(&self) -> &Profile {
        &self.base
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cutoff(&self) -> bool {
        self.cutoff
    }

    pub fn cutoff_radius(&self) -> f64 {
        if self.eps > 0.0 {
            1.0 / self.eps
        } else {
            f64::INFINITY
        }
    }

    pub fn mollifier_width(&self) -> f64 {
        self.eps
    }

    /// (I + εβ)^{-1} r.
    #[inline]
    pub fn resolvent_point(&self, r: f64) -> f64 {
        scalar_resolvent(&self.base.beta, self.eps, r).0
    }

    #[inline]
    pub fn beta_tilde(&self, r: f64) -> f64 {
        if self.eps == 0.0 {
            return self.base.beta.value(r);
        }
        let g = self.resolvent_point(r);
        self.base.beta.value(g) + self.eps * r
    }

    #[inline]
    pub fn beta_tilde_prime(&self, r: f64) -> f64 {
        if self.eps == 0.0 {
            return self.base.beta.derivative(r);
        }
        let g = self.resolvent_point(r);
        let bp = self.base.beta.derivative(g);
        bp / (1.0 + self.eps * bp) + self.eps
    }

    #[inline]
    pub fn b(&self, r: f64) -> f64 {
        let b = &self.base.mobility;
        if self.eps == 0.0 || b.is_constant() {
            return b.value(r);
        }
        let (s, w) = quad::mollifier_rule();
        let conv: f64 = s.iter().zip(w).map(|(s, w)| w * b.value(r - self.eps * s)).sum();
        conv / (1.0 + self.eps * r.abs())
    }

    #[inline]
    pub fn b_prime(&self, r: f64) -> f64 {
        let b = &self.base.mobility;
        if self.eps == 0.0 || b.is_constant() {
            return b.derivative(r);
        }
        let (s, w) = quad::mollifier_rule();
        let mut conv = 0.0;
        let mut dconv = 0.0;
        for (s, w) in s.iter().zip(w) {
            let x = r - self.eps * s;
            conv += w * b.value(x);
            dconv += w * b.derivative(x);
        }
        let q = 1.0 + self.eps * r.abs();
        dconv / q - self.eps * r.signum() * conv / (q * q)
    }

    /// Advected flux density g(r) = b_ε(r) r.
    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        self.b(r) * r
    }

    #[inline]
    pub fn g_prime(&self, r: f64) -> f64 {
        self.b_prime(r) * r + self.b(r)
    }

    /// Splits g into a nondecreasing and a nonincreasing part, both vanishing at 0:
    /// `g↑(r) = ∫₀ʳ max(g', 0)`, `g↓ = g - g↑`.
    pub fn g_split(&self, r: f64) -> (f64, f64) {
        let b = &self.base.mobility;
        let g = self.g(r);
        let up = match b {
            Mobility::Constant { .. } => g,
            Mobility::Lorentzian if self.eps == 0.0 => {
                let c = r.clamp(-1.0, 1.0);
                c / (1.0 + c * c)
            }
            Mobility::Lorentzian => self.increasing_part(r),
        };
        (up, g - up)
    }

    /// `∫₀ʳ max(g', 0)`: sums the increments of g over the pieces of [0, r]
    /// where g' ≥ 0, with sign changes of g' located by bisection.
    fn increasing_part(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let segments = ((r.abs() / 0.25).ceil() as usize).clamp(8, 256);
        let width = r / segments as f64;
        let mut total = 0.0;
        let mut a = 0.0;
        let mut ga = self.g_prime(a);
        for k in 1..=segments {
            let b = if k == segments { r } else { k as f64 * width };
            let gb = self.g_prime(b);
            if (ga >= 0.0) == (gb >= 0.0) {
                if ga >= 0.0 {
                    total += self.g(b) - self.g(a);
                }
            } else {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (self.g_prime(mid) >= 0.0) == (ga >= 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                total += if ga >= 0.0 { self.g(root) - self.g(a) } else { self.g(b) - self.g(root) };
            }
            a = b;
            ga = gb;
        }
        total
    }

    /// Derivatives of the two parts returned by [`g_split`](Self::g_split).
    #[inline]
    pub fn g_split_prime(&self, r: f64) -> (f64, f64) {
        let gp = self.g_prime(r);
        (gp.max(0.0), gp.min(0.0))
    }

    /// Writes D_ε(x) into `out`.
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.base.drift.eval(x, out);
        if self.cutoff && self.eps > 0.0 {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let eta = 1.0 - smoothstep((r - 1.0 / self.eps) / CUTOFF_RAMP_WIDTH);
            out.iter_mut().for_each(|o| *o *= eta);
        }
    }
}

/// β((I + εβ)^{-1} r).
pub fn yosida_beta(profile: &Profile, eps: f64, r: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("yosida parameter eps = {eps} must be positive")));
    }
    let (g, ok) = scalar_resolvent(&profile.beta, eps, r);
    if !ok || !g.is_finite() {
        return Err(Error::ScalarRoot { r });
    }
    Ok(profile.beta.value(g))
}

/// β_ε(r) + ε r.
pub fn beta_tilde(profile: &Profile, eps: f64, r: f64) -> Result<f64> {
    Ok(yosida_beta(profile, eps, r)? + eps * r)
}

/// `(b * ρ_ε)(r) / (1 + ε|r|)`, or b itself when b is constant.
pub fn b_eps(profile: &Profile, eps: f64, r: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("mollifier width eps = {eps} must be positive")));
    }
    Ok(RegularizedProfile::new(profile.clone(), eps)?.b(r))
}

/// η_ε(x) D(x); `eps = 0` disables the cutoff.
pub fn d_eps(profile: &Profile, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
    let reg = RegularizedProfile::new(profile.clone(), eps)?.with_cutoff(true);
    let mut out = vec![0.0; x.len()];
    reg.drift(x, &mut out);
    Ok(out)
}
