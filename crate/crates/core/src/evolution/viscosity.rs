//! The regularized generator `eps Delta + I_eps + div(E_eps f)`, where `I_eps`
//! keeps only jumps with `eps < |z| < 1/eps` and `E_eps = chi_eps E`.

use rayon::prelude::*;

use super::SchemeConfig;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operators::{DriftStencil, OperatorConfig};
use crate::special::kernel_constant;

pub struct ViscousGenerator {
    pub grid: Grid,
    pub eps: f64,
    /// Jump weights by squared lattice offset, zero outside the window.
    weights: Vec<f64>,
    reach: i64,
    diag: Vec<f64>,
    pub drift: DriftStencil,
}

impl ViscousGenerator {
    pub fn new(grid: &Grid, eps: f64, cfg: &OperatorConfig) -> Result<ViscousGenerator> {
        cfg.validate()?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} outside (0, 1)")));
        }
        let d = grid.d;
        let h = grid.h;
        let c = kernel_constant(cfg.alpha, d) * h.powi(d as i32);
        let reach = ((1.0 / eps) / h).ceil() as i64 + 1;
        let max2 = (2 * reach * reach) as usize;
        let weights: Vec<f64> = (0..=max2)
            .map(|s2| {
                let z = (s2 as f64).sqrt() * h;
                if z > eps && z < 1.0 / eps {
                    c * z.powf(-(d as f64) - cfg.alpha)
                } else {
                    0.0
                }
            })
            .collect();
        let mut g = ViscousGenerator {
            grid: *grid,
            eps,
            weights,
            reach,
            diag: vec![0.0; grid.len()],
            drift: DriftStencil::new(grid, &cfg.force.truncated(eps)),
        };
        // censored: jumps that would leave the box are dropped
        let ones = vec![1.0; grid.len()];
        let rows = g.jump_sums(&ones);
        let lap = eps / (h * h);
        g.diag = (0..grid.len())
            .map(|i| -rows[i] - lap * neighbour_count(grid, i) as f64)
            .collect();
        Ok(g)
    }

    fn jump_sums(&self, u: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.n as i64;
        (0..g.len())
            .into_par_iter()
            .map(|i| {
                let (i1, i2) = g.split(i);
                let (i1, i2) = (i1 as i64, i2 as i64);
                let r2 = if g.d == 2 { self.reach } else { 0 };
                let mut s = 0.0;
                for a in (i1 - self.reach).max(0)..=(i1 + self.reach).min(n - 1) {
                    for b in (i2 - r2).max(0)..=(i2 + r2).min(if g.d == 2 { n - 1 } else { 0 }) {
                        let s2 = ((a - i1) * (a - i1) + (b - i2) * (b - i2)) as usize;
                        let w = self.weights.get(s2).copied().unwrap_or(0.0);
                        if w != 0.0 {
                            s += w * u[(a * if g.d == 2 { n } else { 1 } + b) as usize];
                        }
                    }
                }
                s
            })
            .collect()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let lap = self.eps / (g.h * g.h);
        let mut out = self.jump_sums(u);
        let drift = self.drift.apply(u);
        for i in 0..g.len() {
            let mut nb = 0.0;
            for_each_neighbour(&g, i, |j| nb += u[j]);
            out[i] += self.diag[i] * u[i] + lap * nb + drift[i];
        }
        out
    }

    /// Largest total exit rate, the explicit positivity limit.
    pub fn max_rate(&self) -> f64 {
        let dd = self.drift.diagonal();
        self.diag.iter().zip(&dd).fold(0.0, |m, (a, b)| m.max((a + b).abs()))
    }
}

fn for_each_neighbour(g: &Grid, i: usize, mut f: impl FnMut(usize)) {
    let n = g.n;
    let (i1, i2) = g.split(i);
    let stride = if g.d == 2 { n } else { 1 };
    if i1 > 0 {
        f(i - stride);
    }
    if i1 + 1 < n {
        f(i + stride);
    }
    if g.d == 2 {
        if i2 > 0 {
            f(i - 1);
        }
        if i2 + 1 < n {
            f(i + 1);
        }
    }
}

fn neighbour_count(g: &Grid, i: usize) -> usize {
    let mut c = 0;
    for_each_neighbour(g, i, |_| c += 1);
    c
}

pub fn viscosity_generator_apply(field: &Field, eps: f64, cfg: &OperatorConfig) -> Result<Field> {
    let g = ViscousGenerator::new(&field.grid, eps, cfg)?;
    Ok(Field::new(field.grid, g.apply(&field.values)))
}

/// One step of length `dt` of the regularized equation, by SSP-RK2 sub-steps
/// inside the positivity limit.
pub fn viscosity_step(field: &Field, eps: f64, cfg: &OperatorConfig, scheme: &SchemeConfig) -> Result<Field> {
    let g = ViscousGenerator::new(&field.grid, eps, cfg)?;
    let dt = scheme.dt.unwrap_or(1e-2);
    let sub = ((dt * g.max_rate() / scheme.cfl) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    if sub > scheme.max_drift_substeps {
        return Err(Error::Cfl { dt, needed: sub, limit: scheme.max_drift_substeps });
    }
    let tau = dt / sub as f64;
    let mut u = field.values.clone();
    for _ in 0..sub {
        let k1 = g.apply(&u);
        let u1: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + tau * b).collect();
        let k2 = g.apply(&u1);
        for ((v, a), b) in u.iter_mut().zip(&u1).zip(&k2) {
            *v = 0.5 * (*v + a + tau * b);
        }
    }
    if let Some(node) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: dt, node });
    }
    Ok(Field::new(field.grid, u))
}
