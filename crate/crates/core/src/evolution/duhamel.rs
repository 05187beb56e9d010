//! Duhamel identity `e^{t Lambda} = e^{tB} + int_0^t e^{(t-s) Lambda} A e^{sB} ds`
//! for a splitting `Lambda = A + B` of the assembled generator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::expm;
use crate::operators::{assemble_generator_matrix, OperatorConfig, Which};
use crate::special::kernel_constant;

#[derive(Clone, Copy, Debug)]
pub enum DuhamelSplit {
    /// `A = M chi_R`, multiplication by `M` on the ball of radius `R`.
    Localized { m: f64, r: f64 },
    /// `A u = kappa^c * u`, the kernel capped at its value on `|z| = r`.
    Far { r: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct DuhamelReport {
    /// Max-row-sum norm of the defect.
    pub residual: f64,
    /// Simpson intervals used.
    pub points: usize,
    /// Norm of `exp(t Lambda)`, for scale.
    pub scale: f64,
}

/// The matrices `(Lambda, A)` for a split.
pub fn split_matrices(grid: &Grid, cfg: &OperatorConfig, split: DuhamelSplit) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let lam = assemble_generator_matrix(grid, cfg, Which::Forward)?.matrix;
    let len = grid.len();
    let mut a = DMatrix::zeros(len, len);
    match split {
        DuhamelSplit::Localized { m, r } => {
            for i in 0..len {
                if grid.radius(i) < r {
                    a[(i, i)] = m;
                }
            }
        }
        DuhamelSplit::Far { r } => {
            if !(r > 0.0 && r < grid.l) {
                return Err(Error::InvalidParameter(format!("split radius {r} outside (0, L)")));
            }
            let p = grid.d as f64 + cfg.alpha;
            let scale = kernel_constant(cfg.alpha, grid.d) * grid.h.powf(-cfg.alpha);
            let cap = (r / grid.h).powf(-p);
            for j in 0..len {
                let (j1, j2) = grid.split(j);
                for i in 0..len {
                    let (i1, i2) = grid.split(i);
                    let (o1, o2) = (i1 as f64 - j1 as f64, i2 as f64 - j2 as f64);
                    let s2 = o1 * o1 + o2 * o2;
                    a[(i, j)] = scale * if s2 == 0.0 { cap } else { s2.powf(-0.5 * p).min(cap) };
                }
            }
        }
    }
    Ok((lam, a))
}

fn row_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Composite Simpson on `2k` intervals of `int_0^t e^{(t-s)L} A e^{sB} ds`,
/// accumulated in Horner form so only two products are needed per node.
fn simpson_convolution(lam: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64, intervals: usize) -> DMatrix<f64> {
    let ds = t / intervals as f64;
    let p = expm(lam, ds);
    let q = expm(b, ds);
    let mut y = a.clone();
    let mut acc = a * (ds / 3.0);
    for k in 1..=intervals {
        y = &y * &q;
        let w = if k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc = &p * &acc + &y * (w * ds / 3.0);
    }
    acc
}

/// The Duhamel defect, with Simpson intervals doubled from 64 until two
/// successive defects agree to `1e-12` relative.
pub fn duhamel_residual(t: f64, split: DuhamelSplit, grid: &Grid, cfg: &OperatorConfig) -> Result<DuhamelReport> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("t = {t} < 0")));
    }
    let (lam, a) = split_matrices(grid, cfg, split)?;
    if t == 0.0 {
        return Ok(DuhamelReport { residual: 0.0, points: 0, scale: 1.0 });
    }
    let b = &lam - &a;
    let full = expm(&lam, t);
    let base = &full - expm(&b, t);
    let scale = row_norm(&full);
    let mut points = 64;
    let mut prev = f64::INFINITY;
    loop {
        let conv = simpson_convolution(&lam, &a, &b, t, points);
        let residual = row_norm(&(&base - &conv));
        if (residual - prev).abs() <= 1e-12 * scale || points >= 8192 {
            return Ok(DuhamelReport { residual, points, scale });
        }
        prev = residual;
        points *= 2;
    }
}

/// `int_0^t e^{(t-s)L} A e^{sB} ds` as the corner block of one exponential.
pub fn van_loan_convolution(lam: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = lam.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(lam);
    big.view_mut((0, n), (n, n)).copy_from(a);
    big.view_mut((n, n), (n, n)).copy_from(b);
    expm(&big, t).view((0, n), (n, n)).into_owned()
}
