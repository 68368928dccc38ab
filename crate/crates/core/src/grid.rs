//! Uniform rectangular grids and scalar fields over them.
//!
//! Vertices are `(i h1, j h2)` for `i = 0..=n1`, `j = 0..=n2`; storage is
//! row-major with the j index outer and the i index inner, matching both the
//! sweep order of the solver and the CSV layout.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};

/// Uniform grid over `[0, extent1] x [0, extent2]`; in one dimension
/// `n2 = 0` and the second axis collapses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub extent: [f64; 2],
    pub n: [usize; 2],
    pub h: [f64; 2],
}

impl Grid {
    /// One-dimensional grid on `[0, extent]` with `n` cells.
    pub fn new_1d(extent: f64, n: usize) -> Result<Self> {
        if n < 2 || !(extent > 0.0) {
            return Err(Error::Config(format!(
                "grid needs n >= 2 cells and a positive extent, got n={n}, extent={extent}"
            )));
        }
        Ok(Self {
            dim: 1,
            extent: [extent, 0.0],
            n: [n, 0],
            h: [extent / n as f64, 0.0],
        })
    }

    /// Two-dimensional grid on `[0, extent1] x [0, extent2]`.
    pub fn new_2d(extent: [f64; 2], n: [usize; 2]) -> Result<Self> {
        if n[0] < 2 || n[1] < 2 || !(extent[0] > 0.0) || !(extent[1] > 0.0) {
            return Err(Error::Config(format!(
                "grid needs n >= 2 cells and positive extents per axis, got n={n:?}, extent={extent:?}"
            )));
        }
        Ok(Self {
            dim: 2,
            extent,
            n,
            h: [extent[0] / n[0] as f64, extent[1] / n[1] as f64],
        })
    }

    /// Total number of vertices.
    pub fn vertex_count(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1)
    }

    /// Flat index of vertex `(i, j)`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.n[0] + 1) + i
    }

    /// Coordinates of vertex `(i, j)`.
    #[inline]
    pub fn vertex(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.h[0], j as f64 * self.h[1]]
    }

    /// Clamps a point into the grid box, componentwise.
    #[inline]
    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(0.0, self.extent[0]),
            if self.dim == 2 {
                p[1].clamp(0.0, self.extent[1])
            } else {
                0.0
            },
        ]
    }
}

/// Scalar field sampled at the grid vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    /// Constant field.
    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.vertex_count()],
        }
    }

    /// Field from a function of the vertex coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.vertex_count());
        for j in 0..=grid.n[1] {
            for i in 0..=grid.n[0] {
                values.push(f(grid.vertex(i, j)));
            }
        }
        Self { grid, values }
    }

    /// Value at vertex `(i, j)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Mutable value at vertex `(i, j)`.
    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.grid.idx(i, j);
        &mut self.values[k]
    }

    /// Minimum over all vertices.
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Maximum over all vertices.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear (linear in 1D) interpolation at a point.
    ///
    /// Out-of-domain points are clamped into the box first, so the call is
    /// total. Exact at vertices and on fields linear (bilinear) in the
    /// coordinates, and monotone in every vertex value.
    pub fn interpolate(&self, point: [f64; 2]) -> f64 {
        let p = self.grid.clamp(point);
        let (c0, w0) = cell_weight(p[0], self.grid.h[0], self.grid.n[0]);
        if self.grid.dim == 1 {
            return self.at(c0, 0) * (1.0 - w0) + self.at(c0 + 1, 0) * w0;
        }
        let (c1, w1) = cell_weight(p[1], self.grid.h[1], self.grid.n[1]);
        self.at(c0, c1) * (1.0 - w0) * (1.0 - w1)
            + self.at(c0 + 1, c1) * w0 * (1.0 - w1)
            + self.at(c0, c1 + 1) * (1.0 - w0) * w1
            + self.at(c0 + 1, c1 + 1) * w0 * w1
    }

    /// Nearest vertex indices to a (clamped) point.
    pub fn nearest_vertex(&self, point: [f64; 2]) -> (usize, usize) {
        let p = self.grid.clamp(point);
        let i = (p[0] / self.grid.h[0]).round() as usize;
        let i = i.min(self.grid.n[0]);
        if self.grid.dim == 1 {
            return (i, 0);
        }
        let j = (p[1] / self.grid.h[1]).round() as usize;
        (i, j.min(self.grid.n[1]))
    }

    /// Writes the field as CSV (`i,j,x1,x2,value`), j-outer/i-inner,
    /// full double precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "i,j,x1,x2,value")?;
        for j in 0..=self.grid.n[1] {
            for i in 0..=self.grid.n[0] {
                let [x1, x2] = self.grid.vertex(i, j);
                writeln!(
                    out,
                    "{i},{j},{:.16e},{:.16e},{:.16e}",
                    x1,
                    x2,
                    self.at(i, j)
                )?;
            }
        }
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`] (or the extended solver
    /// CSV; only the first value column is used).
    pub fn read_csv(path: &Path, grid: Grid) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut field = Field::constant(grid, f64::NAN);
        let mut lines = file.lines();
        let _header = lines.next();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 5 {
                return Err(Error::Data(format!("short CSV row: {line}")));
            }
            let i: usize = cols[0].trim().parse().map_err(|e| Error::Data(format!("{e}: {line}")))?;
            let j: usize = cols[1].trim().parse().map_err(|e| Error::Data(format!("{e}: {line}")))?;
            let v: f64 = cols[4].trim().parse().map_err(|e| Error::Data(format!("{e}: {line}")))?;
            if i > grid.n[0] || j > grid.n[1] {
                return Err(Error::Data(format!("vertex ({i},{j}) outside grid")));
            }
            *field.at_mut(i, j) = v;
        }
        if field.values.iter().any(|v| v.is_nan()) {
            return Err(Error::Data("CSV does not cover every grid vertex".into()));
        }
        Ok(field)
    }
}

#[inline]
fn cell_weight(x: f64, h: f64, n: usize) -> (usize, f64) {
    let mut c = (x / h) as usize;
    if c > n - 1 {
        c = n - 1;
    }
    (c, (x - c as f64 * h) / h)
}

/// Post-jump state `x_i + b_i(x) z`, clamped into the grid box.
pub fn jump_target(s: [f64; 2], model: &dyn Dynamics, z: f64, grid: &Grid) -> [f64; 2] {
    let b = model.jump_gain(s);
    grid.clamp([s[0] + b[0] * z, s[1] + b[1] * z])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MacrophyteModel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_field_reproduced() {
        let g = Grid::new_2d([1.0, 1.0], [4, 4]).unwrap();
        let f = Field::constant(g, 7.0);
        assert_eq!(f.interpolate([0.33, 0.77]), 7.0);
        assert_eq!(f.interpolate([5.0, -3.0]), 7.0); // clamped
    }

    #[test]
    fn linear_field_reproduced_1d() {
        let g = Grid::new_1d(1.0, 10).unwrap();
        let f = Field::from_fn(g, |p| p[0]);
        assert_abs_diff_eq!(f.interpolate([0.237, 0.0]), 0.237, epsilon = 1e-15);
    }

    #[test]
    fn bilinear_product_field() {
        // F = x1*x2 on h=0.5 grid; point (0.25, 0.25) -> 0.0625
        let g = Grid::new_2d([1.0, 1.0], [2, 2]).unwrap();
        let f = Field::from_fn(g, |p| p[0] * p[1]);
        assert_abs_diff_eq!(f.interpolate([0.25, 0.25]), 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn exact_at_vertices() {
        let g = Grid::new_2d([1.0, 2.0], [5, 8]).unwrap();
        let f = Field::from_fn(g, |p| (p[0] * 3.1).sin() + p[1] * p[1]);
        for j in 0..=8 {
            for i in 0..=5 {
                let v = g.vertex(i, j);
                assert_abs_diff_eq!(f.interpolate(v), f.at(i, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn jump_target_examples() {
        let model = MacrophyteModel::station7();
        let g = Grid::new_2d([1.0, 1.0], [10, 10]).unwrap();
        // b = -x on support [0, 1]: z = 0.5 halves the state
        let t = jump_target([0.4, 0.6], &model, 0.5, &g);
        assert_abs_diff_eq!(t[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1], 0.3, epsilon = 1e-15);
        // z = 0 is the identity
        assert_eq!(jump_target([0.4, 0.6], &model, 0.0, &g), [0.4, 0.6]);
        // z = 1 is total washout
        assert_eq!(jump_target([0.4, 0.6], &model, 1.0, &g), [0.0, 0.0]);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new_2d([1.0, 1.0], [3, 2]).unwrap();
        let f = Field::from_fn(g, |p| 1.0 + p[0] * 10.0 + p[1] * 100.0);
        let dir = std::env::temp_dir().join("orlicz_hjb_grid_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        f.write_csv(&path).unwrap();
        let g2 = Field::read_csv(&path, g).unwrap();
        assert_eq!(f, g2);
    }
}
