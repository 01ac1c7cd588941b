//! Benchmark fixtures.

use nfpe_core::measures::{self, MeasureSpec};
use nfpe_core::semigroup::{self, EvolveConfig};
use nfpe_core::{Field, GridSpec, Profile, Trajectory};

/// Unit-mass Gaussian with variance `var` centred at the origin.
pub fn gaussian(grid: GridSpec, var: f64) -> Field {
    let d = grid.d() as f64;
    let norm = (2.0 * std::f64::consts::PI * var).powf(-d / 2.0);
    Field::from_fn(grid, |x| norm * (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * var)).exp())
}

pub fn porous_medium() -> Profile {
    Profile::porous_medium(2.0).expect("m = 2 is admissible")
}

/// A mollified unit Dirac at the origin and its evolution saved every step.
pub fn dirac_run(n: usize, t_final: f64, dt: f64) -> (MeasureSpec, Trajectory) {
    let grid = GridSpec::new(1, 4.0, n).expect("valid grid");
    let mu = MeasureSpec::dirac(vec![0.0], 1.0).expect("valid atom");
    let u0 = measures::mollify(&mu, measures::DEFAULT_EPS_CELLS * grid.h(), grid).expect("mollifiable");
    let traj = semigroup::evolve(&u0, &porous_medium(), &EvolveConfig::every_step(t_final, dt)).expect("evolves");
    (mu, traj)
}
