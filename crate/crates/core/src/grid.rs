//! Truncated tensor grids, fields sampled on them, and the weights `<x>^k`.

use crate::error::{Error, Result};

/// A point of the grid. In one dimension the second slot is zero.
pub type Point = [f64; 2];

/// Cell-centred uniform grid on `[-L, L]^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub h: f64,
}

pub fn build_grid(d: usize, l: f64, n: usize) -> Result<Grid> {
    if d != 1 && d != 2 {
        return Err(Error::InvalidGrid(format!("dimension {d} not in {{1, 2}}")));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidGrid(format!("half-width L = {l} must be positive")));
    }
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("n = {n} must be a power of two >= 8")));
    }
    Ok(Grid { d, n, l, h: 2.0 * l / n as f64 })
}

impl Grid {
    pub fn new(d: usize, l: f64, n: usize) -> Result<Grid> {
        build_grid(d, l, n)
    }

    /// Number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Coordinate of the `i`-th cell centre along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 0.5) * self.h
    }

    /// Axis indices of a row-major node index.
    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        if self.d == 1 {
            (idx, 0)
        } else {
            (idx / self.n, idx % self.n)
        }
    }

    #[inline]
    pub fn node(&self, idx: usize) -> Point {
        let (i, j) = self.split(idx);
        if self.d == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    pub fn nodes(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    #[inline]
    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.node(idx);
        (x[0] * x[0] + x[1] * x[1]).sqrt()
    }

    /// Index of the node closest to the origin (ties resolved towards lower index).
    pub fn centre_index(&self) -> usize {
        let c = self.n / 2;
        if self.d == 1 {
            c
        } else {
            c * self.n + c
        }
    }

    /// True when the node touches the boundary of the box.
    pub fn on_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.split(idx);
        let edge = |k: usize| k == 0 || k == self.n - 1;
        edge(i) || (self.d == 2 && edge(j))
    }

    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Field {
        Field { grid: *self, values: (0..self.len()).map(|i| f(self.node(i))).collect() }
    }

    pub fn zeros(&self) -> Field {
        Field { grid: *self, values: vec![0.0; self.len()] }
    }

    pub fn constant(&self, c: f64) -> Field {
        Field { grid: *self, values: vec![c; self.len()] }
    }
}

/// Real values on the nodes of a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Field {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        Field { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field { grid: self.grid, values }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum u v h^d`.
    pub fn dot(&self, other: &Field) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute value on the boundary layer of the box.
    pub fn boundary_max_abs(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.grid.on_boundary(i))
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    /// Rescale so that the integral is one.
    pub fn normalized(&self) -> Field {
        self.scale(1.0 / integrate(self))
    }
}

/// Midpoint-rule integral.
pub fn integrate(field: &Field) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.cell_volume()
}

/// `<x> = sqrt(1 + |x|^2)`.
#[inline]
pub fn bracket(x: Point) -> f64 {
    (1.0 + x[0] * x[0] + x[1] * x[1]).sqrt()
}

/// The weight `<x>^k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weight {
    pub k: f64,
}

impl Weight {
    pub fn new(k: f64) -> Weight {
        Weight { k }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        bracket(x).powf(self.k)
    }
}

pub fn weight_field(grid: &Grid, k: f64) -> Field {
    let w = Weight::new(k);
    grid.sample(|x| w.eval(x))
}
