//! Stationary states: by long-time evolution, by a bordered linear solve, as
//! the leading eigenvector, and the closed form for `E = x`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::{evolve_with, MonitorSpec, SchemeConfig, Stepper};
use crate::fft::Fftn;
use crate::grid::{bracket, integrate, Field, Grid};
use crate::linalg::{bordered_null_vector, eigenvalues_by_real_part, inverse_iteration};
use crate::operators::{Generator, GeneratorMatrix, OperatorConfig, Which};
use crate::rates::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Evolution,
    LinearSolve,
    Eigenpair,
    /// Exact fixed point of a discrete one-step map.
    SchemeFixedPoint,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub f: Field,
    pub mass: f64,
    pub route: Route,
    /// `||Lambda F||_inf` with the generator the state was computed for.
    pub residual: f64,
}

impl SteadyState {
    fn new(f: Field, route: Route, cfg: &OperatorConfig) -> Result<SteadyState> {
        let f = f.normalized();
        let g = Generator::new(&f.grid, cfg)?;
        let residual = g.apply(&f.values).iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        Ok(SteadyState { mass: integrate(&f), f, route, residual })
    }

    /// `min F <x>^a` over nodes off the boundary layer.
    pub fn weighted_interior_min(&self, a: f64) -> f64 {
        let g = self.f.grid;
        (0..g.len())
            .filter(|&i| !g.on_boundary(i))
            .map(|i| self.f.values[i] * bracket(g.node(i)).powf(a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// The node nearest the origin, where the bordered row goes.
fn centre_row(grid: &Grid) -> usize {
    grid.centre_index()
}

fn check_regime(cfg: &OperatorConfig) -> Result<()> {
    let gamma = cfg.gamma();
    if gamma <= 2.0 - cfg.alpha {
        return Err(Error::Hypothesis(format!(
            "a steady state is only guaranteed for gamma > 2 - alpha; got gamma = {gamma}, alpha = {}",
            cfg.alpha
        )));
    }
    Ok(())
}

/// Evolve until `||f(t+1) - f(t)||_{L^1} < tol`, up to `max_horizon`.
pub fn steady_by_evolution_from(
    f0: &Field,
    cfg: &OperatorConfig,
    scheme: &SchemeConfig,
    tol: f64,
    max_horizon: f64,
) -> Result<SteadyState> {
    check_regime(cfg)?;
    let st = Stepper::new(&f0.grid, cfg, scheme)?;
    steady_with_stepper(&st, f0, cfg, tol, max_horizon)
}

pub fn steady_with_stepper(
    st: &Stepper,
    f0: &Field,
    cfg: &OperatorConfig,
    tol: f64,
    max_horizon: f64,
) -> Result<SteadyState> {
    let spec = MonitorSpec { every: usize::MAX, ..MonitorSpec::default() };
    let mut f = f0.normalized();
    let mut t = 0.0;
    while t < max_horizon {
        let next = evolve_with(st, &f, 1.0, &[], &spec)?;
        let g = next.final_state().cloned().ok_or_else(|| Error::NoConvergence("empty run".into()))?;
        t += next.times.last().copied().unwrap_or(1.0);
        let change = g.sub(&f).values.iter().map(|v| v.abs()).sum::<f64>() * g.grid.cell_volume();
        f = g;
        if change < tol {
            return SteadyState::new(f, Route::Evolution, cfg);
        }
    }
    Err(Error::NoConvergence(format!(
        "no steady state within t = {max_horizon}; (alpha, gamma) = ({}, {}) may be outside the verified regime",
        cfg.alpha,
        cfg.gamma()
    )))
}

/// Evolution from a normalized Gaussian.
pub fn steady_by_evolution(
    grid: &Grid,
    cfg: &OperatorConfig,
    scheme: &SchemeConfig,
    tol: f64,
    max_horizon: f64,
) -> Result<SteadyState> {
    let f0 = grid.sample(|x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
    steady_by_evolution_from(&f0, cfg, scheme, tol, max_horizon)
}

/// Solve `Lambda F = 0, int F = 1`, replacing the row of the node nearest the origin.
pub fn steady_by_linear_solve(matrix: &GeneratorMatrix, cfg: &OperatorConfig) -> Result<SteadyState> {
    if matrix.which != Which::Forward {
        return Err(Error::InvalidParameter("linear solve needs the forward matrix".into()));
    }
    let g = matrix.grid;
    let w = vec![g.cell_volume(); g.len()];
    let x = bordered_null_vector(&matrix.matrix, &w, centre_row(&g))?;
    SteadyState::new(Field::new(g, x), Route::LinearSolve, cfg)
}

/// The exact fixed point of a stepper's one-step map.
pub fn scheme_fixed_point(st: &Stepper, cfg: &OperatorConfig) -> Result<SteadyState> {
    let mut s = st.step_matrix()?;
    for i in 0..s.nrows() {
        s[(i, i)] -= 1.0;
    }
    let g = st.grid;
    let w = vec![g.cell_volume(); g.len()];
    let x = bordered_null_vector(&s, &w, centre_row(&g))?;
    SteadyState::new(Field::new(g, x), Route::SchemeFixedPoint, cfg)
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda: f64,
    pub lambda_im: f64,
    /// Leading eigenvector with mass 1.
    pub vector: Field,
    /// Distance from `lambda` to the next real part.
    pub gap: f64,
}

pub fn leading_eigenpair(matrix: &GeneratorMatrix) -> Result<Eigenpair> {
    let m = &matrix.matrix;
    let scale = crate::operators::one_norm(m);
    let ev = eigenvalues_by_real_part(m);
    let (re, im) = ev[0];
    if im.abs() > 1e-8 * scale {
        return Err(Error::Hypothesis(format!("leading eigenvalue {re} + {im}i is not real")));
    }
    let gap = ev.get(1).map_or(f64::INFINITY, |e| re - e.0);
    let g = matrix.grid;
    let v = inverse_iteration(m, re, &vec![1.0; g.len()])?;
    let s: f64 = v.iter().sum();
    let v: Vec<f64> = v.iter().map(|x| x / (s * g.cell_volume())).collect();
    let top = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let low = v.iter().copied().fold(f64::INFINITY, f64::min);
    if low < -1e-10 * top {
        return Err(Error::Hypothesis(format!("leading eigenvector changes sign (min {low:.3e})")));
    }
    Ok(Eigenpair { lambda: re, lambda_im: im, vector: Field::new(g, v), gap })
}

/// Steady state of `d_t f = Delta^{alpha/2} f + div(x f)` from its Fourier
/// transform `exp(-|2 pi xi|^alpha / alpha)`, which has mass 1 on the whole
/// space. The transform is sampled on a box `pad` times larger, so the
/// periodization error is that of the tail beyond `pad L`.
pub fn closed_form_equilibrium(alpha: f64, grid: &Grid, gamma: f64) -> Result<Field> {
    closed_form_equilibrium_padded(alpha, grid, gamma, 32)
}

pub fn closed_form_equilibrium_padded(alpha: f64, grid: &Grid, gamma: f64, pad: usize) -> Result<Field> {
    if gamma != 2.0 {
        return Err(Error::InvalidParameter(format!("closed form exists only for gamma = 2, got {gamma}")));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 2]")));
    }
    let d = grid.d;
    let n = grid.n;
    let p = n * pad.max(1);
    let big_l = 2.0 * grid.l * pad.max(1) as f64;
    let fft = Fftn::new(d, p);
    let len = p.pow(d as u32);
    let w = 2.0 * std::f64::consts::PI / big_l;
    let mut buf: Vec<Complex64> = (0..len)
        .map(|k| {
            let (k1, k2) = if d == 1 { (k, 0) } else { (k / p, k % p) };
            let a = fft.freq(k1);
            let b = if d == 2 { fft.freq(k2) } else { 0.0 };
            let r = w * (a * a + b * b).sqrt();
            Complex64::new((-r.powf(alpha) / alpha).exp(), 0.0)
        })
        .collect();
    // node x_i = -L + (i + 1/2) h; shift so that the transform lands on the nodes
    let shift = |k: usize| {
        let f = fft.freq(k);
        Complex64::from_polar(1.0, w * f * (-grid.l + 0.5 * grid.h))
    };
    for (k, b) in buf.iter_mut().enumerate() {
        let (k1, k2) = if d == 1 { (k, 0) } else { (k / p, k % p) };
        *b *= shift(k1);
        if d == 2 {
            *b *= shift(k2);
        }
    }
    fft.run(&mut buf, true);
    let norm = 1.0 / big_l.powi(d as i32);
    let values = (0..grid.len())
        .map(|idx| {
            let (i1, i2) = grid.split(idx);
            let k = if d == 1 { i1 } else { i1 * p + i2 };
            buf[k].re * norm
        })
        .collect();
    Ok(Field::new(*grid, values))
}

#[derive(Clone, Copy, Debug)]
pub struct TailFit {
    pub a_hat: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fit `F ~ <x>^{-a}` on `r_min <= |x| <= r_max`, which must lie in `[L/4, 3L/4]`.
pub fn tail_exponent(f: &Field, window: (f64, f64)) -> Result<TailFit> {
    let g = f.grid;
    let (lo, hi) = window;
    let tol = 1e-12 * g.l;
    if lo < 0.25 * g.l - tol || hi > 0.75 * g.l + tol || lo >= hi {
        return Err(Error::Fit(format!("window [{lo}, {hi}] must lie inside [L/4, 3L/4] = [{}, {}]", 0.25 * g.l, 0.75 * g.l)));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..g.len() {
        let r = g.radius(i);
        if r >= lo && r <= hi {
            let v = f.values[i];
            if v <= 0.0 {
                return Err(Error::NonPositive(format!("F = {v:.3e} at |x| = {r}")));
            }
            xs.push(bracket(g.node(i)).ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 8 {
        return Err(Error::Fit(format!("only {} points in the tail window", xs.len())));
    }
    let fit = linear_fit(&xs, &ys);
    Ok(TailFit { a_hat: -fit.slope, r2: fit.r2, points: xs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::DiffusionSolver;
    use crate::grid::build_grid;
    use crate::operators::assemble_generator_matrix;
    use std::f64::consts::PI;

    fn cauchy(g: &Grid) -> Field {
        g.sample(|x| 1.0 / (PI * (1.0 + x[0] * x[0])))
    }

    fn l1(a: &Field, b: &Field) -> f64 {
        a.sub(b).values.iter().map(|v| v.abs()).sum::<f64>() * a.grid.cell_volume()
    }

    #[test]
    fn closed_form_matches_cauchy_and_gaussian() {
        let g = build_grid(1, 40.0, 2048).unwrap();
        let f = closed_form_equilibrium(1.0, &g, 2.0).unwrap();
        let c = cauchy(&g);
        // the node nearest the origin sits at h/2
        let x0 = 0.5 * g.h;
        assert!((f.values[g.n / 2] - 1.0 / (PI * (1.0 + x0 * x0))).abs() < 1e-6);
        assert!(f.sub(&c).max_abs() < 1e-5, "{}", f.sub(&c).max_abs());
        // alpha = 2: exp(-2 pi^2 xi^2) is the unit-variance Gaussian
        let g = build_grid(1, 10.0, 256).unwrap();
        let f = closed_form_equilibrium(2.0, &g, 2.0).unwrap();
        let gauss = g.sample(|x| (-x[0] * x[0] / 2.0).exp() / (2.0 * PI).sqrt());
        assert!(f.sub(&gauss).max_abs() < 1e-12);
        assert!((integrate(&f) - 1.0).abs() < 1e-10);
        assert!(closed_form_equilibrium(1.0, &g, 2.5).is_err());
    }

    #[test]
    fn closed_form_in_two_dimensions() {
        let g = build_grid(2, 12.0, 64).unwrap();
        let f = closed_form_equilibrium(1.5, &g, 2.0).unwrap();
        let (i, j) = (20, 40);
        assert!((f.values[i * 64 + j] - f.values[j * 64 + i]).abs() < 1e-14);
        let f = closed_form_equilibrium(2.0, &g, 2.0).unwrap();
        let gauss = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * PI));
        assert!(f.sub(&gauss).max_abs() < 1e-12);
    }

    #[test]
    fn tail_exponent_on_constructed_inputs() {
        let g = build_grid(1, 40.0, 2048).unwrap();
        let c = tail_exponent(&cauchy(&g), (10.0, 30.0)).unwrap();
        assert!((c.a_hat - 2.0).abs() < 0.05, "{}", c.a_hat);
        let s = tail_exponent(&g.sample(|x| bracket(x).powi(-3)), (10.0, 30.0)).unwrap();
        assert!((s.a_hat - 3.0).abs() < 0.02);
        assert!(s.r2 > 0.999999);
        assert!(tail_exponent(&cauchy(&g), (1.0, 30.0)).is_err());
        let coarse = build_grid(1, 40.0, 8).unwrap();
        assert!(tail_exponent(&cauchy(&coarse), (10.0, 30.0)).is_err());
    }

    #[test]
    fn linear_solve_approaches_cauchy() {
        // the upwind drift is first order; n = 2048 is covered by the acceptance run
        let cfg = OperatorConfig::new(1.0, 2.0);
        let mut dist = Vec::new();
        for n in [512, 1024] {
            let g = build_grid(1, 40.0, n).unwrap();
            let m = assemble_generator_matrix(&g, &cfg, Which::Forward).unwrap();
            let s = steady_by_linear_solve(&m, &cfg).unwrap();
            dist.push(l1(&s.f, &cauchy(&g)));
            assert!((s.mass - 1.0).abs() < 1e-10);
            assert!(s.f.min() >= 0.0);
            assert!(s.weighted_interior_min(1.0 + 1.0 + 0.5) > 0.0);
        }
        assert!(dist[0] < 4e-2 && dist[1] < 2.5e-2 && dist[1] < dist[0], "{dist:?}");
    }

    #[test]
    fn eigenpair_and_linear_solve_agree() {
        let g = build_grid(1, 20.0, 256).unwrap();
        let cfg = OperatorConfig::new(1.0, 2.0);
        let m = assemble_generator_matrix(&g, &cfg, Which::Forward).unwrap();
        let e = leading_eigenpair(&m).unwrap();
        assert!(e.lambda.abs() < 1e-8 * crate::operators::one_norm(&m.matrix), "{}", e.lambda);
        assert!(e.gap > 0.0);
        assert!(e.vector.min() > 0.0);
        let s = steady_by_linear_solve(&m, &cfg).unwrap();
        assert!(e.vector.sub(&s.f).max_abs() < 1e-8, "{}", e.vector.sub(&s.f).max_abs());
    }

    #[test]
    fn evolution_routes_agree_and_forget_the_initial_datum() {
        let g = build_grid(1, 20.0, 256).unwrap();
        let cfg = OperatorConfig::new(1.5, 3.0);
        let scheme = SchemeConfig::default().with_dt(0.01).with_diffusion(DiffusionSolver::MatrixExponential);
        let st = Stepper::new(&g, &cfg, &scheme).unwrap();
        let tol = 1e-7;
        let a = steady_with_stepper(&st, &g.sample(|x| (-x[0] * x[0]).exp()), &cfg, tol, 100.0).unwrap();
        let b = steady_with_stepper(&st, &g.sample(|x| if (x[0] - 1.0).abs() < 1.0 { 1.0 } else { 0.0 }), &cfg, tol, 100.0)
            .unwrap();
        assert!(l1(&a.f, &b.f) < 2.0 * tol);
        assert!(a.f.min() > 0.0);
        let fp = scheme_fixed_point(&st, &cfg).unwrap();
        assert!(l1(&a.f, &fp.f) < 2.0 * tol);
        // against the generator kernel: the splitting error of the fixed point
        let m = assemble_generator_matrix(&g, &cfg, Which::Forward).unwrap();
        let s = steady_by_linear_solve(&m, &cfg).unwrap();
        assert!(s.residual < 1e-10 * crate::operators::one_norm(&m.matrix));
        assert!(l1(&a.f, &s.f) < 1e-3, "{}", l1(&a.f, &s.f));
    }

    #[test]
    fn outside_the_regime_is_rejected() {
        let g = build_grid(1, 20.0, 64).unwrap();
        let cfg = OperatorConfig::new(0.5, 1.2);
        assert!(matches!(
            steady_by_evolution(&g, &cfg, &SchemeConfig::default(), 1e-6, 10.0),
            Err(Error::Hypothesis(_))
        ));
    }
}
