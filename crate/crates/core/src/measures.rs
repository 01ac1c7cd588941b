//! Bounded-measure initial data (finitely many atoms plus a density),
//! mollification onto a grid, evolution of mollified data and the weak-star
//! initial-trace check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, GridSpec};
use crate::profiles::Profile;
use crate::quad;
use crate::semigroup::{evolve, EvolveConfig, Trajectory};

/// Default mollification width in units of the grid spacing.
pub const DEFAULT_EPS_CELLS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureSpec {
    pub atoms: Vec<(Vec<f64>, f64)>,
    pub density: Option<Field>,
}

impl MeasureSpec {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>, density: Option<Field>) -> Result<MeasureSpec> {
        if atoms.iter().any(|(x, w)| !w.is_finite() || x.iter().any(|c| !c.is_finite())) {
            return Err(invalid("atoms must have finite positions and weights"));
        }
        if let Some(f) = &density {
            if f.values().iter().any(|v| !v.is_finite()) {
                return Err(invalid("density contains non-finite values"));
            }
        }
        Ok(MeasureSpec { atoms, density })
    }

    pub fn dirac(point: Vec<f64>, weight: f64) -> Result<MeasureSpec> {
        MeasureSpec::new(vec![(point, weight)], None)
    }

    /// `Σ|w_i| + |density|_1`: the total variation when atoms and density are
    /// mutually singular, an upper bound otherwise.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w.abs()).sum::<f64>() + self.density.as_ref().map_or(0.0, Field::l1)
    }

    /// `μ(1)`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum::<f64>() + self.density.as_ref().map_or(0.0, Field::mass)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|(_, w)| *w >= 0.0) && self.density.as_ref().is_none_or(|f| f.min() >= 0.0)
    }

    /// Nonnegative with total mass `1 ± 1e-12`.
    pub fn is_probability(&self) -> bool {
        self.is_nonnegative() && (self.total_mass() - 1.0).abs() <= 1e-12
    }

    /// `μ(ψ)`; the density part uses the midpoint rule.
    pub fn apply(&self, psi: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
        self.atoms.iter().map(|(x, w)| w * psi(x)).sum::<f64>()
            + self.density.as_ref().map_or(0.0, |f| f.integrate_against(psi))
    }

    /// Checks that every atom lies in the box of `grid` and the density lives on `grid`.
    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        for (x, _) in &self.atoms {
            if x.len() != grid.d() {
                return Err(Error::GridMismatch(format!(
                    "atom has {} coordinates, grid has d = {}",
                    x.len(),
                    grid.d()
                )));
            }
            if !grid.contains(x) {
                return Err(Error::OutsideBox { point: x.clone(), half_width: grid.half_width() });
            }
        }
        if let Some(f) = &self.density {
            if f.grid() != grid {
                return Err(Error::GridMismatch(format!("density grid {:?} differs from {:?}", f.grid(), grid)));
            }
        }
        Ok(())
    }
}

/// `μ * ρ_ε` on `grid`: atoms are deposited with cloud-in-cell weights, the
/// density is taken cell-wise, and every source cell is spread with the
/// sampled bump of radius `eps`, renormalized over the cells inside the box
/// so that no mass is gained or lost.
pub fn mollify(mu: &MeasureSpec, eps: f64, grid: GridSpec) -> Result<Field> {
    let h = grid.h();
    if !(eps >= h * (1.0 - 1e-12)) {
        return Err(invalid(format!("mollification width {eps} is below the grid spacing {h}")));
    }
    if !(eps < grid.half_width() / 4.0) {
        return Err(invalid(format!("mollification width {eps} must be below L/4 = {}", grid.half_width() / 4.0)));
    }
    mu.check_grid(&grid)?;
    let mut source = Field::deposit_mass(grid, &mu.atoms)?;
    if let Some(f) = &mu.density {
        for (s, v) in source.values_mut().iter_mut().zip(f.values()) {
            *s += v;
        }
    }

    let d = grid.d();
    let n = grid.n() as isize;
    let reach = (eps / h).floor() as isize;
    let width = 2 * reach + 1;
    // kernel on the offset cube, row-major in (axis 0 fastest)
    let offsets: Vec<([isize; 3], f64)> = (0..width.pow(d as u32))
        .filter_map(|j| {
            let mut off = [0isize; 3];
            let mut rest = j;
            let mut r2 = 0.0;
            for o in off.iter_mut().take(d) {
                *o = rest % width - reach;
                rest /= width;
                r2 += (*o as f64 * h).powi(2);
            }
            let w = quad::bump(r2.sqrt() / eps);
            (w > 0.0).then_some((off, w))
        })
        .collect();

    let neighbour = |i: usize, off: &[isize; 3]| -> Option<usize> {
        let mi = grid.multi_index(i);
        let mut out = [0usize; 3];
        for k in 0..d {
            let p = mi[k] as isize + off[k];
            if p < 0 || p >= n {
                return None;
            }
            out[k] = p as usize;
        }
        Some(grid.linear_index(out))
    };
    // per-source normalization over the in-box part of the stencil
    let norms: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if source.values()[i] == 0.0 {
                return 0.0;
            }
            offsets.iter().filter(|(o, _)| neighbour(i, o).is_some()).map(|(_, w)| w).sum()
        })
        .collect();
    let src = source.values();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let mut acc = 0.0;
            for (o, w) in &offsets {
                let neg = [-o[0], -o[1], -o[2]];
                if let Some(i) = neighbour(j, &neg) {
                    if src[i] != 0.0 {
                        acc += src[i] * w / norms[i];
                    }
                }
            }
            acc
        })
        .collect();
    Field::from_values(grid, values)
}

/// Pairwise L¹ distances between the runs for two mollification widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub eps_a: f64,
    pub eps_b: f64,
    /// `(t, |u_a(t) - u_b(t)|_1)` at every saved time.
    pub distances: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eps_list: Vec<f64>,
    pub total_variation: f64,
    pub mass: f64,
    pub pairs: Vec<PairDistance>,
}

/// Evolves `μ * ρ_ε` for every ε in `eps_list` (concurrently) and returns the
/// smallest-ε trajectory with the pairwise stability report.
pub fn evolve_measure(
    mu: &MeasureSpec,
    grid: GridSpec,
    profile: &Profile,
    eps_list: &[f64],
    cfg: &EvolveConfig,
) -> Result<(Trajectory, StabilityReport)> {
    if profile.beta().degeneracy().is_none() {
        return Err(invalid("measure data need a lower bound beta'(r) >= a |r|^(alpha-1) with a > 0, alpha >= 1"));
    }
    if eps_list.is_empty() {
        return Err(invalid("eps_list is empty"));
    }
    let runs: Vec<(f64, Trajectory)> = eps_list
        .par_iter()
        .map(|&eps| {
            let u0 = mollify(mu, eps, grid)?;
            Ok((eps, evolve(&u0, profile, cfg)?))
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            let distances = runs[a]
                .1
                .times
                .iter()
                .zip(runs[a].1.fields.iter().zip(&runs[b].1.fields))
                .map(|(t, (ua, ub))| Ok((*t, ua.l1_distance(ub)?)))
                .collect::<Result<_>>()?;
            pairs.push(PairDistance { eps_a: runs[a].0, eps_b: runs[b].0, distances });
        }
    }
    let report = StabilityReport {
        eps_list: eps_list.to_vec(),
        total_variation: mu.total_variation(),
        mass: mu.total_mass(),
        pairs,
    };
    let smallest =
        runs.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).map(|(_, traj)| traj).expect("eps_list is nonempty");
    Ok((smallest, report))
}

/// Gaps `|∫u(t)ψ - μ(ψ)|` along the saved positive times, and their linear
/// extrapolation to `t = 0` from the two earliest times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub gaps: Vec<(f64, f64)>,
    pub extrapolated: f64,
}

/// A test function for [`weak_star_trace`].
pub type Observable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

pub fn weak_star_trace(traj: &Trajectory, mu: &MeasureSpec, psi_list: &[Observable<'_>]) -> Vec<TraceReport> {
    psi_list
        .iter()
        .map(|psi| {
            let target = mu.apply(*psi);
            let gaps: Vec<(f64, f64)> = traj
                .times
                .iter()
                .zip(&traj.fields)
                .filter(|(t, _)| **t > 0.0)
                .map(|(t, u)| (*t, (u.integrate_against(*psi) - target).abs()))
                .collect();
            let extrapolated = match gaps.as_slice() {
                [] => f64::NAN,
                [(_, g)] => *g,
                [(t0, g0), (t1, g1), ..] => {
                    let slope = (g1 - g0) / (t1 - t0);
                    (g0 - slope * t0).abs()
                }
            };
            TraceReport { gaps, extrapolated }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_becomes_bump_of_radius_eps() {
        let g = GridSpec::new(1, 2.0, 200).unwrap();
        let eps = 4.0 * g.h();
        let u = mollify(&MeasureSpec::dirac(vec![0.0], 1.0).unwrap(), eps, g).unwrap();
        assert!((u.mass() - 1.0).abs() < 1e-12);
        assert!(u.min() >= 0.0);
        for (i, v) in u.values().iter().enumerate() {
            if g.coord(i).abs() > eps + g.h() {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn two_atoms_keep_total_mass() {
        let g = GridSpec::new(2, 3.0, 60).unwrap();
        let mu = MeasureSpec::new(vec![(vec![-1.0, 0.0], 0.3), (vec![1.0, 0.5], 0.7)], None).unwrap();
        assert!(mu.is_probability());
        let u = mollify(&mu, 4.0 * g.h(), g).unwrap();
        assert!((u.mass() - 1.0).abs() < 1e-12);
        assert!(u.l1() <= mu.total_variation() + 1e-12);
    }

    #[test]
    fn atom_near_the_wall_keeps_mass() {
        let g = GridSpec::new(1, 2.0, 100).unwrap();
        let mu = MeasureSpec::dirac(vec![1.98], 1.0).unwrap();
        let u = mollify(&mu, 0.2, g).unwrap();
        assert!((u.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_density_is_changed_at_second_order() {
        // leading term: |μ*ρ_ε - u0|_1 ≈ ε² m₂ |u0''|_1 / 2 with m₂ the second
        // moment of the normalized one-dimensional bump
        let eps = 0.2;
        let z = quad::integrate(quad::bump, -1.0, 1.0, 64);
        let m2 = quad::integrate(|s| s * s * quad::bump(s), -1.0, 1.0, 64) / z;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let second = |x: f64| (4.0 * x * x - 2.0).abs() * (-x * x).exp();
        let l1_second = quad::integrate(second, -10.0, -r, 64)
            + quad::integrate(second, -r, r, 64)
            + quad::integrate(second, r, 10.0, 64);
        let expected = 0.5 * eps * eps * m2 * l1_second;
        for n in [200usize, 400] {
            let g = GridSpec::new(1, 4.0, n).unwrap();
            let u0 = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
            let mu = MeasureSpec::new(vec![], Some(u0.clone())).unwrap();
            let err = mollify(&mu, eps, g).unwrap().l1_distance(&u0).unwrap();
            assert!((err / expected - 1.0).abs() < 0.03, "n={n}: {err} vs {expected}");
        }
    }

    #[test]
    fn preconditions() {
        let g = GridSpec::new(1, 2.0, 100).unwrap();
        let mu = MeasureSpec::dirac(vec![0.0], 1.0).unwrap();
        assert!(mollify(&mu, 0.5 * g.h(), g).is_err());
        assert!(mollify(&mu, 0.6, g).is_err());
        assert!(mollify(&MeasureSpec::dirac(vec![2.5], 1.0).unwrap(), 0.1, g).is_err());
    }

    #[test]
    fn zero_measure_gives_zero_trajectory() {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let (traj, rep) = evolve_measure(
            &MeasureSpec::default(),
            g,
            &Profile::porous_medium(2.0).unwrap(),
            &[4.0 * g.h()],
            &EvolveConfig::new(0.1, 0.01, vec![0.05, 0.1]),
        )
        .unwrap();
        assert!(traj.fields.iter().all(|f| f.linf() == 0.0));
        assert_eq!(rep.mass, 0.0);
    }

    #[test]
    fn dirac_run_is_stable_and_bounded() {
        let g = GridSpec::new(1, 3.0, 300).unwrap();
        let h = g.h();
        let mu = MeasureSpec::dirac(vec![0.0], 1.0).unwrap();
        let cfg = EvolveConfig::new(0.1, 1e-3, vec![0.01, 0.1]);
        let (traj, rep) =
            evolve_measure(&mu, g, &Profile::porous_medium(2.0).unwrap(), &[4.0 * h, 2.0 * h], &cfg).unwrap();
        assert!(traj.fields.iter().all(|f| f.linf().is_finite()));
        for d in &traj.diagnostics {
            assert!((d.mass - 1.0).abs() < 1e-11);
        }
        let dist = &rep.pairs[0].distances;
        assert!(dist[1].1 < dist[0].1, "{dist:?}");

        let one = |_: &[f64]| 1.0;
        let smooth = |x: &[f64]| (x[0] - 0.3).cos();
        let far = |x: &[f64]| if x[0] > 2.0 { (x[0] - 2.0).powi(2) } else { 0.0 };
        let traces = weak_star_trace(&traj, &mu, &[&one, &smooth, &far]);
        assert!(traces[0].gaps.iter().all(|(_, g)| *g <= 1e-11));
        assert!(traces[1].gaps[0].1 < traces[1].gaps[1].1);
        assert!(traces[2].gaps.iter().all(|(_, g)| *g < 1e-14));
    }
}
