//! Uniform tensor-product finite-volume grid on `[-L, L]^d` and cell-averaged fields.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sum;

pub const FIELD_MAGIC: &[u8; 4] = b"NFPF";
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    half_width: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(d: usize, half_width: f64, n: usize) -> Result<GridSpec> {
        let mut problems = Vec::new();
        if !(1..=3).contains(&d) {
            problems.push(format!("dimension d = {d} must be 1, 2 or 3"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            problems.push(format!("half-width L = {half_width} must be positive"));
        }
        if n < 4 || !n.is_multiple_of(2) {
            problems.push(format!("cells per axis n = {n} must be even and >= 4"));
        }
        if problems.is_empty() {
            Ok(GridSpec { d, half_width, n })
        } else {
            Err(invalid(problems.join("; ")))
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn total_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.d as i32)
    }

    /// Number of cells, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear-index stride of `axis` (axis 0 is fastest).
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = idx;
        for slot in out.iter_mut().take(self.d) {
            *slot = rem % self.n;
            rem /= self.n;
        }
        out
    }

    #[inline]
    pub fn linear_index(&self, mi: [usize; 3]) -> usize {
        let mut idx = 0;
        for axis in (0..self.d).rev() {
            idx = idx * self.n + mi[axis];
        }
        idx
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h()
    }

    /// Cell center; unused trailing coordinates are zero.
    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 3];
        for k in 0..self.d {
            x[k] = self.coord(mi[k]);
        }
        x
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.d && x.iter().all(|v| v.abs() <= self.half_width)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::GridMismatch(format!(
                "point has {} coordinates, grid is {}-dimensional",
                x.len(),
                self.d
            )));
        }
        if !self.contains(x) {
            return Err(Error::OutsideBox { point: x.to_vec(), half_width: self.half_width });
        }
        Ok(())
    }

    /// Multilinear stencil of `x`: per axis the lower cell index and the weight
    /// of the upper neighbour. Points within half a cell of a face collapse
    /// onto the boundary cell.
    #[inline]
    pub(crate) fn stencil(&self, x: &[f64]) -> ([usize; 3], [f64; 3]) {
        let h = self.h();
        let mut lower = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..self.d {
            let s = (x[k] + self.half_width) / h - 0.5;
            let i0 = (s.floor().max(0.0) as usize).min(self.n - 2);
            lower[k] = i0;
            frac[k] = (s - i0 as f64).clamp(0.0, 1.0);
        }
        (lower, frac)
    }

    /// Calls `f(linear_index, weight)` for each of the `2^d` stencil corners.
    #[inline]
    pub(crate) fn for_each_corner(&self, x: &[f64], mut f: impl FnMut(usize, f64)) {
        let (lower, frac) = self.stencil(x);
        for corner in 0..(1usize << self.d) {
            let mut mi = [0; 3];
            let mut w = 1.0;
            for k in 0..self.d {
                if corner >> k & 1 == 1 {
                    mi[k] = lower[k] + 1;
                    w *= frac[k];
                } else {
                    mi[k] = lower[k];
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                f(self.linear_index(mi), w);
            }
        }
    }
}

/// Cell-averaged grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Field {
        Field { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} cells", values.len(), grid.len())));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Field {
        let d = grid.d();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.center(i);
                f(&x[..d])
            })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// `h^d Σ u_i`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * sum::sum(&self.values)
    }

    /// Cell-volume weighted `(Σ |u_i|^p h^d)^{1/p}`; `p = ∞` gives `max |u_i|`.
    pub fn norm_p(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(invalid(format!("norm exponent p = {p} must be >= 1")));
        }
        if p.is_infinite() {
            return Ok(self.linf());
        }
        let v = &self.values;
        let s = if p == 1.0 {
            sum::sum_map(v.len(), |i| v[i].abs())
        } else if p == 2.0 {
            sum::sum_map(v.len(), |i| v[i] * v[i])
        } else {
            sum::sum_map(v.len(), |i| v[i].abs().powf(p))
        };
        Ok((s * self.grid.cell_volume()).powf(1.0 / p))
    }

    pub fn l1(&self) -> f64 {
        let v = &self.values;
        self.grid.cell_volume() * sum::sum_map(v.len(), |i| v[i].abs())
    }

    pub fn l2(&self) -> f64 {
        self.norm_p(2.0).expect("p = 2 is valid")
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `|self - other|_1`.
    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        let (a, b) = (&self.values, &other.values);
        Ok(self.grid.cell_volume() * sum::sum_map(a.len(), |i| (a[i] - b[i]).abs()))
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, b: f64, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }

    /// `∫ u ψ` by the midpoint rule at cell centers.
    pub fn integrate_against(&self, psi: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let d = self.grid.d();
        let v = &self.values;
        self.grid.cell_volume()
            * sum::sum_map(v.len(), |i| {
                let x = self.grid.center(i);
                v[i] * psi(&x[..d])
            })
    }

    /// Multilinear interpolation of cell values at `x`.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        self.grid.check_point(x)?;
        Ok(self.interpolate_unchecked(x))
    }

    /// As [`interpolate`](Self::interpolate) for a point known to be inside the box.
    #[inline]
    pub fn interpolate_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.grid.for_each_corner(x, |i, w| acc += w * self.values[i]);
        acc
    }

    /// Deposits weighted atoms onto the grid with multilinear (cloud-in-cell)
    /// weights; the deposited mass equals the sum of the weights.
    pub fn deposit_mass(grid: GridSpec, points: &[(Vec<f64>, f64)]) -> Result<Field> {
        let mut field = Field::zeros(grid);
        let inv_vol = 1.0 / grid.cell_volume();
        for (x, w) in points {
            grid.check_point(x)?;
            grid.for_each_corner(x, |i, frac| field.values[i] += frac * w * inv_vol);
        }
        Ok(field)
    }

    fn checksum(values: &[f64]) -> u64 {
        // FNV-1a over the little-endian payload
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for v in values {
            for byte in v.to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }

    /// Binary layout: `b"NFPF"`, d (u32), n (u64), L (f64), FNV-1a checksum
    /// of the payload (u64), then `n^d` little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(FIELD_MAGIC);
        header[4..8].copy_from_slice(&(self.grid.d as u32).to_le_bytes());
        header[8..16].copy_from_slice(&(self.grid.n as u64).to_le_bytes());
        header[16..24].copy_from_slice(&self.grid.half_width.to_le_bytes());
        header[24..32].copy_from_slice(&Self::checksum(&self.values).to_le_bytes());
        w.write_all(&header)?;
        let mut payload = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Field> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != FIELD_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let d = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let half_width = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let checksum = u64::from_le_bytes(header[24..32].try_into().unwrap());
        let grid = GridSpec::new(d, half_width, n).map_err(|e| Error::Format(e.to_string()))?;
        let mut payload = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut payload)?;
        let values: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if Self::checksum(&values) != checksum {
            return Err(Error::Format("checksum mismatch".into()));
        }
        Ok(Field { grid, values })
    }

    /// CSV rows `i[,j[,k]],x[,y[,z]],value` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let axes = ["i", "j", "k"];
        let coords = ["x", "y", "z"];
        let d = self.grid.d;
        let mut head: Vec<&str> = axes[..d].to_vec();
        head.extend_from_slice(&coords[..d]);
        head.push("value");
        writeln!(w, "{}", head.join(","))?;
        for (idx, v) in self.values.iter().enumerate() {
            let mi = self.grid.multi_index(idx);
            let x = self.grid.center(idx);
            let mut row: Vec<String> = mi[..d].iter().map(|i| i.to_string()).collect();
            row.extend(x[..d].iter().map(|c| fmt_f64(*c)));
            row.push(fmt_f64(*v));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Round-trip-safe formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
