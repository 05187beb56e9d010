//! Shared inputs for the benchmarks.

use fracfp::{build_grid, Field, Grid};

pub fn grid_1d(n: usize) -> Grid {
    build_grid(1, 20.0, n).expect("bench grid")
}

/// A unit-mass Gaussian of width `L/20`, decayed to round-off at the boundary.
pub fn gaussian(grid: &Grid) -> Field {
    let s = 0.05 * grid.l;
    grid.sample(|x| (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * s * s)).exp()).normalized()
}
