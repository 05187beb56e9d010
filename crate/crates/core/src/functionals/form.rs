//! The symmetric lattice form behind `G`, `D_p` and the seminorms.
//!
//! Pairs inside the box are summed directly with the lattice weights of the
//! jump operator. For the zero-extension exterior the pairs with one point
//! outside contribute `tau_i u_i v_i`, split half at `x_i` and half outside;
//! the censored and reinjected operators have no exterior pairs.

use rayon::prelude::*;

use crate::grid::{Field, Grid};
use crate::operators::{Exterior, LatticeKernel, OperatorConfig};

/// Offset-indexed lattice weights plus the exterior exit rate.
pub struct SymmetricForm {
    pub grid: Grid,
    pub alpha: f64,
    pub exterior: Exterior,
    table: Vec<f64>,
    /// Rate of jumps from each node to the outside of the box.
    pub tau: Vec<f64>,
}

impl SymmetricForm {
    pub fn new(grid: &Grid, cfg: &OperatorConfig) -> SymmetricForm {
        let exterior = match cfg.exterior {
            Exterior::Reinjected => Exterior::Censored,
            e => e,
        };
        let kernel = LatticeKernel::new(grid, cfg.alpha, exterior);
        let n = grid.n;
        let table = if grid.d == 1 {
            (0..n).map(|a| kernel.weight(a, 0)).collect()
        } else {
            (0..n * n).map(|k| kernel.weight(k, 0)).collect()
        };
        let tau = if exterior == Exterior::ZeroExtension { kernel.exit_rate.clone() } else { vec![0.0; grid.len()] };
        SymmetricForm { grid: *grid, alpha: cfg.alpha, exterior, table, tau }
    }

    #[inline]
    fn w(&self, i: usize, j: usize) -> f64 {
        let (i1, i2) = self.grid.split(i);
        let (j1, j2) = self.grid.split(j);
        let a = i1.abs_diff(j1);
        if self.grid.d == 1 {
            self.table[a]
        } else {
            self.table[a * self.grid.n + i2.abs_diff(j2)]
        }
    }

    /// `out_i = sum_{j != i} W_ij f(i, j)`, parallel over `i`.
    pub fn pair_sum(&self, f: impl Fn(usize, usize) -> f64 + Sync) -> Vec<f64> {
        let len = self.grid.len();
        (0..len)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in 0..len {
                    if j != i {
                        s += self.w(i, j) * f(i, j);
                    }
                }
                s
            })
            .collect()
    }

    /// The jump operator `I` this form belongs to.
    pub fn fraclap(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.pair_sum(|i, j| u[j] - u[i]);
        for ((o, t), v) in out.iter_mut().zip(&self.tau).zip(u) {
            *o -= t * v;
        }
        out
    }

    /// Pointwise `G(u, v)` on the box nodes.
    pub fn carre_du_champ(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.pair_sum(|i, j| 0.5 * (u[j] - u[i]) * (v[j] - v[i]));
        for (i, o) in out.iter_mut().enumerate() {
            *o += 0.5 * self.tau[i] * u[i] * v[i];
        }
        out
    }

    /// `int_{R^d} G(u, v)`: the box nodes plus the exterior half of the boundary pairs.
    pub fn integrated_carre_du_champ(&self, u: &[f64], v: &[f64]) -> f64 {
        let g = self.carre_du_champ(u, v);
        let ext: f64 = (0..u.len()).map(|i| 0.5 * self.tau[i] * u[i] * v[i]).sum();
        (g.iter().sum::<f64>() + ext) * self.grid.cell_volume()
    }

    pub fn dissipation_field(&self, u: &[f64], p: f64) -> Vec<f64> {
        let w: Vec<f64> = u.iter().map(|&x| signed_pow(x, p - 1.0)).collect();
        self.carre_du_champ(u, &w)
    }

    /// `int_{R^d} D_p(u)`.
    pub fn dissipation(&self, u: &[f64], p: f64) -> f64 {
        let w: Vec<f64> = u.iter().map(|&x| signed_pow(x, p - 1.0)).collect();
        self.integrated_carre_du_champ(u, &w)
    }

    /// Pointwise `int kappa |u_*^{p/2} - u^{p/2}|^2`.
    pub fn gradient_form(&self, u: &[f64], p: f64) -> Vec<f64> {
        let w: Vec<f64> = u.iter().map(|&x| signed_pow(x, 0.5 * p)).collect();
        let mut out = self.pair_sum(|i, j| (w[j] - w[i]).powi(2));
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.tau[i] * w[i] * w[i];
        }
        out
    }

    pub fn field(&self, values: Vec<f64>) -> Field {
        Field::new(self.grid, values)
    }
}

/// `|x|^{a-1} x`, with `0^a = 0`.
#[inline]
pub fn signed_pow(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(a - 1.0) * x
    }
}
