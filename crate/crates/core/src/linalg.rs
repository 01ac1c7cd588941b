//! Banded (2d+1 diagonals) stencil matrices on a [`GridSpec`] and the linear
//! solvers used inside the Newton iteration.

use rayon::prelude::*;

use crate::grid::GridSpec;
use crate::sum;

const PAR_CHUNK: usize = 2048;

/// Matrix with one diagonal and, per axis, the couplings to the lower and
/// upper neighbour. Couplings across the box faces are always zero.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    grid: GridSpec,
    pub diag: Vec<f64>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl StencilMatrix {
    pub fn zeros(grid: GridSpec) -> StencilMatrix {
        let n = grid.len();
        StencilMatrix {
            grid,
            diag: vec![0.0; n],
            lower: vec![vec![0.0; n]; grid.d()],
            upper: vec![vec![0.0; n]; grid.d()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let n = g.n();
        y.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * PAR_CHUNK;
            for (off, yi) in chunk.iter_mut().enumerate() {
                let i = base + off;
                let mut acc = self.diag[i] * x[i];
                for k in 0..g.d() {
                    let s = g.stride(k);
                    let pos = (i / s) % n;
                    if pos > 0 {
                        acc += self.lower[k][i] * x[i - s];
                    }
                    if pos + 1 < n {
                        acc += self.upper[k][i] * x[i + s];
                    }
                }
                *yi = acc;
            }
        });
    }

    /// Dense copy, for small reference checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let g = self.grid;
        let len = g.len();
        let mut a = vec![vec![0.0; len]; len];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = self.diag[i];
            for k in 0..g.d() {
                let s = g.stride(k);
                let pos = (i / s) % g.n();
                if pos > 0 {
                    row[i - s] += self.lower[k][i];
                }
                if pos + 1 < g.n() {
                    row[i + s] += self.upper[k][i];
                }
            }
        }
        a
    }

    /// Solves `A x = b`: tridiagonal elimination in one dimension,
    /// Jacobi-preconditioned BiCGSTAB otherwise. Returns the iteration count
    /// of the iterative solver (0 for the direct path).
    pub fn solve(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
        if self.grid.d() == 1 {
            (self.solve_tridiagonal(b), 0)
        } else {
            self.solve_bicgstab(b, rel_tol, max_iter)
        }
    }

    /// Thomas algorithm. Stable without pivoting for the column-diagonally
    /// dominant matrices produced by the conservative monotone scheme.
    pub fn solve_tridiagonal(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(self.grid.d(), 1);
        let n = rhs.len();
        let (lo, up) = (&self.lower[0], &self.upper[0]);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        c[0] = up[0] / denom;
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - lo[i] * c[i - 1];
            c[i] = if i + 1 < n { up[i] / denom } else { 0.0 };
            d[i] = (rhs[i] - lo[i] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    }

    pub fn solve_bicgstab(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
        let n = b.len();
        let inv_diag: Vec<f64> = self.diag.iter().map(|d| 1.0 / d).collect();
        let precond = |v: &[f64], out: &mut [f64]| {
            out.par_iter_mut().zip(v.par_iter()).zip(inv_diag.par_iter()).for_each(|((o, v), m)| *o = v * m);
        };
        let norm = |v: &[f64]| sum::dot(v, v).sqrt();
        let b_norm = norm(b);
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return (x, 0);
        }
        let target = rel_tol * b_norm;
        let mut r = b.to_vec();
        let r_hat = r.clone();
        let mut p = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut best = (x.clone(), b_norm);
        for it in 1..=max_iter {
            let rho_new = sum::dot(&r_hat, &r);
            if rho_new == 0.0 || omega == 0.0 {
                return (best.0, it);
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            p.par_iter_mut()
                .zip(r.par_iter().zip(v.par_iter()))
                .for_each(|(p, (r, v))| *p = r + beta * (*p - omega * v));
            precond(&p, &mut y);
            self.matvec(&y, &mut v);
            let denom = sum::dot(&r_hat, &v);
            if denom == 0.0 {
                return (best.0, it);
            }
            alpha = rho / denom;
            s.par_iter_mut().zip(r.par_iter().zip(v.par_iter())).for_each(|(s, (r, v))| *s = r - alpha * v);
            let s_norm = norm(&s);
            if s_norm <= target {
                x.par_iter_mut().zip(y.par_iter()).for_each(|(x, y)| *x += alpha * y);
                return (x, it);
            }
            precond(&s, &mut z);
            self.matvec(&z, &mut t);
            let tt = sum::dot(&t, &t);
            omega = if tt == 0.0 { 0.0 } else { sum::dot(&t, &s) / tt };
            x.par_iter_mut().zip(y.par_iter().zip(z.par_iter())).for_each(|(x, (y, z))| *x += alpha * y + omega * z);
            r.par_iter_mut().zip(s.par_iter().zip(t.par_iter())).for_each(|(r, (s, t))| *r = s - omega * t);
            let r_norm = norm(&r);
            if r_norm < best.1 {
                best = (x.clone(), r_norm);
            }
            if r_norm <= target {
                return (x, it);
            }
        }
        (best.0, max_iter)
    }
}

/// Dense Gaussian elimination with partial pivoting, for reference checks.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_like(grid: GridSpec, shift: f64) -> StencilMatrix {
        let mut m = StencilMatrix::zeros(grid);
        let n = grid.n();
        for i in 0..grid.len() {
            m.diag[i] = 1.0 + shift;
            for k in 0..grid.d() {
                let s = grid.stride(k);
                let pos = (i / s) % n;
                if pos > 0 {
                    m.lower[k][i] = -0.7 - 0.01 * k as f64;
                    m.diag[i] += 0.7 + 0.01 * k as f64;
                }
                if pos + 1 < n {
                    m.upper[k][i] = -0.5;
                    m.diag[i] += 0.5;
                }
            }
        }
        m
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let m = laplacian_like(g, 0.3);
        let b: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let x = m.solve_tridiagonal(&b);
        let reference = dense_solve(m.to_dense(), b);
        for (a, r) in x.iter().zip(&reference) {
            assert!((a - r).abs() < 1e-13);
        }
    }

    #[test]
    fn bicgstab_matches_dense_in_2d_and_3d() {
        for grid in [GridSpec::new(2, 1.0, 8).unwrap(), GridSpec::new(3, 1.0, 4).unwrap()] {
            let m = laplacian_like(grid, 0.1);
            let b: Vec<f64> = (0..grid.len()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
            let (x, _) = m.solve_bicgstab(&b, 1e-14, 500);
            let reference = dense_solve(m.to_dense(), b);
            for (a, r) in x.iter().zip(&reference) {
                assert!((a - r).abs() < 1e-11, "{a} vs {r}");
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let grid = GridSpec::new(2, 1.0, 6).unwrap();
        let m = laplacian_like(grid, 0.0);
        let x: Vec<f64> = (0..grid.len()).map(|i| i as f64 * 0.1).collect();
        let mut y = vec![0.0; grid.len()];
        m.matvec(&x, &mut y);
        let dense = m.to_dense();
        for i in 0..grid.len() {
            let r: f64 = dense[i].iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((y[i] - r).abs() < 1e-13);
        }
    }
}
