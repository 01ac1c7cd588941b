//! Gauss-Legendre quadrature and the standard mollifier bump.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// 8-point rule, cached.
pub fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

/// Composite 8-point Gauss-Legendre integral of `f` over [a, b] with `panels` panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gl8();
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            acc += wi * f(mid + 0.5 * width * xi);
        }
        total += 0.5 * width * acc;
    }
    total
}

/// Unnormalized bump `exp(-1/(1-s²))` on (-1, 1), zero outside.
pub fn bump(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

const MOLLIFIER_PANELS: usize = 32;

/// Quadrature nodes and weights for `∫ g(s) ρ(s) ds`, where ρ is the bump
/// normalized so that the discrete weights sum to exactly one.
pub fn mollifier_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gl8();
        let width = 2.0 / MOLLIFIER_PANELS as f64;
        let mut nodes = Vec::with_capacity(8 * MOLLIFIER_PANELS);
        let mut weights = Vec::with_capacity(8 * MOLLIFIER_PANELS);
        for p in 0..MOLLIFIER_PANELS {
            let mid = -1.0 + (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(w) {
                let s = mid + 0.5 * width * xi;
                nodes.push(s);
                weights.push(0.5 * width * wi * bump(s));
            }
        }
        let z: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= z;
        }
        (nodes, weights)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is exact for 8 points
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((approx - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bump_normalization_constant() {
        // known value of ∫ exp(-1/(1-s²)) ds over [-1, 1]
        let z = integrate(bump, -1.0, 1.0, 64);
        assert!((z - 0.443_993_816_168_079_4).abs() < 1e-12, "{z}");
    }

    #[test]
    fn mollifier_rule_has_unit_mass_and_is_symmetric() {
        let (s, w) = mollifier_rule();
        let mass: f64 = w.iter().sum();
        assert!((mass - 1.0).abs() < 1e-15);
        let first: f64 = s.iter().zip(w).map(|(s, w)| s * w).sum();
        assert!(first.abs() < 1e-15);
    }
}
