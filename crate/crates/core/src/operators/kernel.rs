//! Lattice discretization of the jump kernel `c |z|^{-d-alpha}`.
//!
//! On the lattice `hZ^d` the singular integral becomes
//! `sum_o W(o) (u(x + o h) - u(x))` with `W(o) = c h^{-alpha} |o|^{-d-alpha}`.
//! The principal-value remainder is a generalized Euler-Maclaurin term
//! `-zeta_d(alpha) h^{2-alpha} Delta u / (2d)`, which we fold into the nearest
//! neighbour weights. All weights stay nonnegative, so the stencil is Metzler,
//! and the error is `O(h^{4-alpha})` for smooth fields.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::fft::Fftn;
use crate::grid::Grid;
use crate::special::{hurwitz_zeta, kernel_constant, lattice_zeta};

/// What the jump operator does with mass that would land outside the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exterior {
    /// Fields are zero outside; jumps out of the box are lost (analytic tail term).
    ZeroExtension,
    /// Jumps leaving the box are suppressed (regional operator).
    Censored,
    /// Jumps leaving the box land on the boundary cell nearest to the landing point.
    Reinjected,
    /// The box is a torus; the kernel is periodized.
    Periodic,
}

/// Nearest-neighbour correction constant (in units of `c h^{-alpha}`).
pub fn near_correction(alpha: f64, d: usize) -> f64 {
    match d {
        1 => -crate::special::zeta(alpha - 1.0),
        _ => -0.25 * lattice_zeta(2, alpha),
    }
}

/// Raw lattice weight `|o|^{-d-alpha}` plus the nearest-neighbour correction.
#[inline]
fn raw_weight(o1: i64, o2: i64, d: usize, alpha: f64, nn: f64) -> f64 {
    let r2 = (o1 * o1 + o2 * o2) as f64;
    if r2 == 0.0 {
        return 0.0;
    }
    let w = r2.powf(-0.5 * (d as f64 + alpha));
    if r2 == 1.0 {
        w + nn
    } else {
        w
    }
}

/// `int_0^phi0 sin(t)^alpha dt` for `0 <= phi0 <= pi/2`, via the incomplete beta function.
pub(crate) fn int_sin_pow(alpha: f64, phi0: f64) -> f64 {
    if phi0 <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * (1.0 + alpha);
    let x = phi0.min(0.5 * PI).sin().powi(2);
    0.5 * statrs::function::beta::beta(a, 0.5) * statrs::function::beta::beta_reg(a, 0.5, x)
}

/// `int_{y1 >= a, y2 >= b} |y|^{-2-alpha} dy` for `a, b > 0`.
pub(crate) fn quadrant_integral(alpha: f64, a: f64, b: f64) -> f64 {
    let th = (b / a).atan();
    (b.powf(-alpha) * int_sin_pow(alpha, th) + a.powf(-alpha) * int_sin_pow(alpha, 0.5 * PI - th))
        / alpha
}

/// `sum_{m >= a} (m^2 + q^2)^{-1-alpha/2}` for integer `a >= 1`.
fn sum_beyond(alpha: f64, a: i64, q: f64) -> f64 {
    const K: i64 = 48;
    let s = 1.0 + 0.5 * alpha;
    let q2 = q * q;
    let f = |m: f64| (m * m + q2).powf(-s);
    let mut sum = 0.0;
    for m in (a..a + K).rev() {
        sum += f(m as f64);
    }
    let m0 = (a + K) as f64;
    let integral = if q == 0.0 {
        m0.powf(-1.0 - alpha) / (1.0 + alpha)
    } else {
        q.abs().powf(-1.0 - alpha) * int_sin_pow(alpha, (q.abs() / m0).atan())
    };
    let fp = -2.0 * s * m0 * (m0 * m0 + q2).powf(-s - 1.0);
    sum + integral + 0.5 * f(m0) - fp / 12.0
}

/// `sum_{m1 >= a1, m2 >= a2} |m|^{-2-alpha}` for integers `a1, a2 >= 1`.
fn corner_sum(alpha: f64, a1: i64, a2: i64) -> f64 {
    const K: i64 = 48;
    let m2_end = a2 + K;
    let mut sum = 0.0;
    for m2 in (a2..m2_end).rev() {
        sum += sum_beyond(alpha, a1, m2 as f64);
    }
    // remaining rows m2 >= m2_end, by Euler-Maclaurin in m2 and then in m1
    let y0 = m2_end as f64;
    let g = |m: f64| m.powf(-1.0 - alpha) * int_sin_pow(alpha, (m / y0).atan());
    let mut integral = 0.0;
    for m1 in (a1..a1 + K).rev() {
        integral += g(m1 as f64);
    }
    let m1 = (a1 + K) as f64;
    integral += quadrant_integral(alpha, m1, y0) + 0.5 * g(m1) - (g(m1 + 0.5) - g(m1 - 0.5)) / 12.0;
    let ds = sum_beyond(alpha, a1, y0 + 0.5) - sum_beyond(alpha, a1, y0 - 0.5);
    sum + integral + 0.5 * sum_beyond(alpha, a1, y0) - ds / 12.0
}

/// Boundary reinjection rates, in units of `c h^{-alpha}`.
#[derive(Clone, Debug)]
enum Reinjection {
    /// `tail[a] = sum_{m >= a} W(m)` for `a = 1..=n`.
    D1 { tail: Vec<f64> },
    /// `side[a][q] = sum_{m >= a} W(m, q)` for `a = 1..=n`, `q = 0..n`;
    /// `corner[a1][a2]` for `a1, a2 = 1..=n`.
    D2 { side: Vec<f64>, corner: Vec<f64> },
}

impl Reinjection {
    fn build(grid: &Grid, alpha: f64, nn: f64) -> Reinjection {
        let n = grid.n;
        if grid.d == 1 {
            let mut tail = vec![0.0; n + 1];
            for (a, t) in tail.iter_mut().enumerate().skip(1) {
                *t = hurwitz_zeta(1.0 + alpha, a as f64) + if a == 1 { nn } else { 0.0 };
            }
            Reinjection::D1 { tail }
        } else {
            use rayon::prelude::*;
            let side: Vec<f64> = (0..(n + 1) * n)
                .into_par_iter()
                .map(|k| {
                    let (a, q) = (k / n, k % n);
                    if a == 0 {
                        return 0.0;
                    }
                    sum_beyond(alpha, a as i64, q as f64)
                        + if a == 1 && q == 0 { nn } else { 0.0 }
                })
                .collect();
            let corner: Vec<f64> = (0..(n + 1) * (n + 1))
                .into_par_iter()
                .map(|k| {
                    let (a1, a2) = (k / (n + 1), k % (n + 1));
                    if a1 == 0 || a2 == 0 || a1 > a2 {
                        return 0.0;
                    }
                    corner_sum(alpha, a1 as i64, a2 as i64)
                })
                .collect();
            let mut corner = corner;
            for a1 in 1..=n {
                for a2 in 1..a1 {
                    corner[a1 * (n + 1) + a2] = corner[a2 * (n + 1) + a1];
                }
            }
            Reinjection::D2 { side, corner }
        }
    }

    fn side(&self, n: usize, a: usize, q: i64) -> f64 {
        match self {
            Reinjection::D2 { side, .. } => side[a * n + q.unsigned_abs() as usize],
            Reinjection::D1 { .. } => unreachable!(),
        }
    }

    fn corner(&self, n: usize, a1: usize, a2: usize) -> f64 {
        match self {
            Reinjection::D2 { corner, .. } => corner[a1 * (n + 1) + a2],
            Reinjection::D1 { .. } => unreachable!(),
        }
    }

    /// Calls `f(target, rate)` for every boundary cell receiving mass from `src`.
    fn for_each_target(&self, grid: &Grid, src: usize, mut f: impl FnMut(usize, f64)) {
        let n = grid.n;
        match self {
            Reinjection::D1 { tail } => {
                f(n - 1, tail[n - src]);
                f(0, tail[src + 1]);
            }
            Reinjection::D2 { .. } => {
                let (j1, j2) = grid.split(src);
                let idx = |a: usize, b: usize| a * n + b;
                for b in 0..n {
                    let q1 = b as i64 - j2 as i64;
                    f(idx(n - 1, b), self.side(n, n - j1, q1));
                    f(idx(0, b), self.side(n, j1 + 1, q1));
                    let q2 = b as i64 - j1 as i64;
                    f(idx(b, n - 1), self.side(n, n - j2, q2));
                    f(idx(b, 0), self.side(n, j2 + 1, q2));
                }
                f(idx(n - 1, n - 1), self.corner(n, n - j1, n - j2));
                f(idx(n - 1, 0), self.corner(n, n - j1, j2 + 1));
                f(idx(0, n - 1), self.corner(n, j1 + 1, n - j2));
                f(idx(0, 0), self.corner(n, j1 + 1, j2 + 1));
            }
        }
    }
}

/// Discrete jump operator on a grid with a chosen exterior treatment.
pub struct LatticeKernel {
    pub grid: Grid,
    pub alpha: f64,
    pub exterior: Exterior,
    /// `c_{alpha,d} h^{-alpha}`.
    pub scale: f64,
    /// Nearest-neighbour correction in units of `scale`.
    pub nn: f64,
    /// Full-lattice weight sum `sum_{o != 0} W(o)`.
    pub total: f64,
    /// Coefficient of `u_i` in the output.
    pub diag: Vec<f64>,
    /// Total rate of jumps leaving the box from each node.
    pub exit_rate: Vec<f64>,
    fft: Fftn,
    spectrum: Vec<Complex64>,
    periodic_weights: Option<Vec<f64>>,
    reinjection: Option<Reinjection>,
}

impl LatticeKernel {
    pub fn new(grid: &Grid, alpha: f64, exterior: Exterior) -> LatticeKernel {
        let d = grid.d;
        let n = grid.n;
        let nn = near_correction(alpha, d);
        let scale = kernel_constant(alpha, d) * grid.h.powf(-alpha);
        let total = scale * (lattice_zeta(d, d as f64 + alpha) + 2.0 * d as f64 * nn);
        let periodic = exterior == Exterior::Periodic;
        let p = if periodic { n } else { 2 * n };
        let fft = Fftn::new(d, p);
        let len = p.pow(d as u32);
        let mut wbuf = vec![Complex64::new(0.0, 0.0); len];
        let periodic_weights = if periodic { Some(periodized(grid, alpha, nn)) } else { None };
        match &periodic_weights {
            Some(pw) => {
                for (b, w) in wbuf.iter_mut().zip(pw) {
                    *b = Complex64::new(scale * w, 0.0);
                }
            }
            None => {
                let wrap = |k: usize| if k < n { k as i64 } else { k as i64 - p as i64 };
                for (k, b) in wbuf.iter_mut().enumerate() {
                    let (k1, k2) = if d == 1 { (k, 0) } else { (k / p, k % p) };
                    let (o1, o2) = (wrap(k1), if d == 1 { 0 } else { wrap(k2) });
                    if k1 == n || (d == 2 && k2 == n) {
                        continue;
                    }
                    *b = Complex64::new(scale * raw_weight(o1, o2, d, alpha, nn), 0.0);
                }
            }
        }
        fft.run(&mut wbuf, false);
        let mut kernel = LatticeKernel {
            grid: *grid,
            alpha,
            exterior,
            scale,
            nn,
            total,
            diag: vec![0.0; grid.len()],
            exit_rate: vec![0.0; grid.len()],
            fft,
            spectrum: wbuf,
            periodic_weights,
            reinjection: None,
        };
        let ones = vec![1.0; grid.len()];
        let row_sum = kernel.convolve(&ones);
        match exterior {
            Exterior::Periodic => {
                let s: f64 = kernel.periodic_weights.as_ref().unwrap().iter().sum::<f64>() * scale;
                kernel.diag.iter_mut().for_each(|v| *v = -s);
            }
            Exterior::Censored => {
                kernel.diag = row_sum.iter().map(|s| -s).collect();
            }
            Exterior::ZeroExtension => {
                kernel.exit_rate = row_sum.iter().map(|s| (total - s).max(0.0)).collect();
                kernel.diag = vec![-total; grid.len()];
            }
            Exterior::Reinjected => {
                let re = Reinjection::build(grid, alpha, nn);
                for j in 0..grid.len() {
                    let mut t = 0.0;
                    re.for_each_target(grid, j, |_, r| t += r);
                    kernel.exit_rate[j] = scale * t;
                    kernel.diag[j] = -(row_sum[j] + scale * t);
                }
                kernel.reinjection = Some(re);
            }
        }
        kernel
    }

    /// Weight between two nodes (`i != j`), periodized if needed.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i1, i2) = self.grid.split(i);
        let (j1, j2) = self.grid.split(j);
        let (o1, o2) = (i1 as i64 - j1 as i64, i2 as i64 - j2 as i64);
        match &self.periodic_weights {
            Some(pw) => {
                let n = self.grid.n as i64;
                let k1 = o1.rem_euclid(n) as usize;
                let k = if self.grid.d == 1 { k1 } else { k1 * self.grid.n + o2.rem_euclid(n) as usize };
                self.scale * pw[k]
            }
            None => self.scale * raw_weight(o1, o2, self.grid.d, self.alpha, self.nn),
        }
    }

    /// `sum_{j in box} W(i - j) u_j` via FFT.
    pub fn convolve(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let p = self.fft.p;
        let d = self.grid.d;
        let mut buf = vec![Complex64::new(0.0, 0.0); p.pow(d as u32)];
        if d == 1 {
            for i in 0..n {
                buf[i].re = u[i];
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    buf[i * p + j].re = u[i * n + j];
                }
            }
        }
        self.fft.run(&mut buf, false);
        for (b, w) in buf.iter_mut().zip(&self.spectrum) {
            *b *= w;
        }
        self.fft.run(&mut buf, true);
        let norm = 1.0 / buf.len() as f64;
        if d == 1 {
            (0..n).map(|i| buf[i].re * norm).collect()
        } else {
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = buf[i * p + j].re * norm;
                }
            }
            out
        }
    }

    /// Apply the discrete jump operator.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.convolve(u);
        for ((o, d), v) in out.iter_mut().zip(&self.diag).zip(u) {
            *o += d * v;
        }
        self.add_reinjection(u, &mut out);
        out
    }

    /// Transpose of `apply`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        // the lattice part is symmetric
        let mut out = self.convolve(g);
        for ((o, d), v) in out.iter_mut().zip(&self.diag).zip(g) {
            *o += d * v;
        }
        if let Some(re) = &self.reinjection {
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                re.for_each_target(&self.grid, j, |b, r| acc += r * g[b]);
                *o += self.scale * acc;
            }
        }
        out
    }

    fn add_reinjection(&self, u: &[f64], out: &mut [f64]) {
        if let Some(re) = &self.reinjection {
            for (j, &uj) in u.iter().enumerate() {
                if uj != 0.0 {
                    re.for_each_target(&self.grid, j, |b, r| out[b] += self.scale * r * uj);
                }
            }
        }
    }

    /// Direct `O(N^2)` application, used as an oracle for the FFT path.
    pub fn apply_direct(&self, u: &[f64]) -> Vec<f64> {
        use rayon::prelude::*;
        let mut out: Vec<f64> = (0..u.len())
            .into_par_iter()
            .map(|i| {
                let mut s = self.diag[i] * u[i];
                for (j, &uj) in u.iter().enumerate() {
                    if j != i {
                        s += self.weight(i, j) * uj;
                    }
                }
                s
            })
            .collect();
        self.add_reinjection(u, &mut out);
        out
    }

    /// Dense matrix of the operator, column-major `N x N`.
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        use rayon::prelude::*;
        let len = self.grid.len();
        let mut m = nalgebra::DMatrix::<f64>::zeros(len, len);
        m.as_mut_slice().par_chunks_mut(len).enumerate().for_each(|(j, col)| {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.weight(i, j);
            }
            col[j] = self.diag[j];
            if let Some(re) = &self.reinjection {
                re.for_each_target(&self.grid, j, |b, r| col[b] += self.scale * r);
            }
        });
        m
    }
}

/// Periodized raw weights on the `n^d` torus, in units of `c h^{-alpha}`.
fn periodized(grid: &Grid, alpha: f64, nn: f64) -> Vec<f64> {
    let n = grid.n;
    let nf = n as f64;
    let mut w = vec![0.0; grid.len()];
    if grid.d == 1 {
        for (j, wj) in w.iter_mut().enumerate().skip(1) {
            let t = j as f64 / nf;
            *wj = nf.powf(-1.0 - alpha)
                * (hurwitz_zeta(1.0 + alpha, t) + hurwitz_zeta(1.0 + alpha, 1.0 - t));
        }
        w[1] += nn;
        w[n - 1] += nn;
    } else {
        use rayon::prelude::*;
        const M: i64 = 6;
        let s = 1.0 + 0.5 * alpha;
        let a = (M as f64 + 0.5) * nf;
        // images beyond the (2M+1)^2 block, as a continuum integral outside the square
        // int_0^{pi/4} cos^alpha = int_{pi/4}^{pi/2} sin^alpha
        let cos_int = int_sin_pow(alpha, 0.5 * PI) - int_sin_pow(alpha, 0.25 * PI);
        let tail = 8.0 / alpha * a.powf(-alpha) * cos_int / (nf * nf);
        w.par_iter_mut().enumerate().for_each(|(k, wk)| {
            let (k1, k2) = ((k / n) as i64, (k % n) as i64);
            let mut acc = 0.0;
            for m1 in -M..=M {
                for m2 in -M..=M {
                    let o1 = (k1 + m1 * n as i64) as f64;
                    let o2 = (k2 + m2 * n as i64) as f64;
                    let r2 = o1 * o1 + o2 * o2;
                    if r2 > 0.0 {
                        acc += r2.powf(-s);
                    }
                }
            }
            *wk = if k == 0 { 0.0 } else { acc + tail };
        });
        for k in [1, n - 1, n, (n - 1) * n] {
            w[k] += nn;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn gauss(g: &Grid) -> Vec<f64> {
        g.sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp()).values
    }

    #[test]
    fn fft_matches_direct() {
        for (d, n) in [(1, 64), (2, 16)] {
            let g = build_grid(d, 4.0, n).unwrap();
            let u = gauss(&g);
            for ext in [Exterior::ZeroExtension, Exterior::Censored, Exterior::Reinjected, Exterior::Periodic] {
                let k = LatticeKernel::new(&g, 1.3, ext);
                let a = k.apply(&u);
                let b = k.apply_direct(&u);
                let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                assert!(err < 1e-11 * k.total, "{d} {ext:?}: {err}");
            }
        }
    }

    #[test]
    fn sin_power_integral() {
        // int_0^{pi/2} sin^alpha = sqrt(pi)/2 Gamma((1+a)/2)/Gamma(1+a/2)
        use crate::special::gamma;
        for a in [0.3, 1.0, 1.7] {
            let exact = PI.sqrt() / 2.0 * gamma(0.5 * (1.0 + a)) / gamma(1.0 + 0.5 * a);
            assert!((int_sin_pow(a, 0.5 * PI) - exact).abs() < 1e-9, "{a}");
        }
        assert!((int_sin_pow(1.0, 0.3) - (1.0 - 0.3f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn reinjection_rates_match_lattice_tail() {
        // the exit rate from the tables must equal total - in-box row sum
        for alpha in [0.5, 1.5] {
            let g = build_grid(2, 3.0, 16).unwrap();
            let re = LatticeKernel::new(&g, alpha, Exterior::Reinjected);
            let ze = LatticeKernel::new(&g, alpha, Exterior::ZeroExtension);
            let mut worst: f64 = 0.0;
            for j in 0..g.len() {
                let rel = (re.exit_rate[j] - ze.exit_rate[j]).abs() / ze.exit_rate[j];
                worst = worst.max(rel);
            }
            assert!(worst < 1e-8, "alpha {alpha}: rel {worst}");
        }
    }

    #[test]
    fn conservative_exteriors_have_zero_column_sums() {
        for (d, n) in [(1, 32), (2, 8)] {
            let g = build_grid(d, 3.0, n).unwrap();
            for ext in [Exterior::Censored, Exterior::Reinjected, Exterior::Periodic] {
                let k = LatticeKernel::new(&g, 0.8, ext);
                let m = k.dense();
                for j in 0..g.len() {
                    let s: f64 = m.column(j).iter().sum();
                    assert!(s.abs() < 1e-12 * k.total, "{ext:?} col {j}: {s}");
                    for i in 0..g.len() {
                        if i != j {
                            assert!(m[(i, j)] >= 0.0);
                        }
                    }
                }
            }
        }
    }
}
