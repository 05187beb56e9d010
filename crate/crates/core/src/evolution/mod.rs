//! Time integration of `d_t f = Lambda f` by operator splitting.
//!
//! The drift is advanced by explicit upwind finite volumes with SSP-RK2
//! (Heun) sub-steps, each within the positivity limit `tau <= cfl / rate`.
//! The jump part is advanced exactly in Fourier (periodic box), by one
//! implicit Euler solve, or by the dense exponential of the jump matrix.

mod duhamel;
mod viscosity;

pub use duhamel::{duhamel_residual, split_matrices, van_loan_convolution, DuhamelReport, DuhamelSplit};
pub use viscosity::{viscosity_generator_apply, viscosity_step, ViscousGenerator};

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::functionals::weighted_norm;
use crate::grid::{integrate, Field, Grid};
use crate::linalg::expm;
use crate::operators::{DriftStencil, Generator, GeneratorMatrix, OperatorConfig, SpectralMultiplier, DENSE_LIMIT};

/// Relative mass drift that aborts a run.
pub const MASS_ABORT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Splitting {
    Lie,
    Strang,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffusionSolver {
    /// `exp(-|2 pi xi|^alpha dt)` on the periodic box.
    ExactSpectral,
    /// `(I - dt J)^{-1}` with the dense jump matrix `J`.
    ImplicitMatrix,
    /// `exp(dt J)`, precomputed once.
    MatrixExponential,
}

#[derive(Clone, Copy, Debug)]
pub struct SchemeConfig {
    /// Step; `None` picks `cfl h / max |E|`.
    pub dt: Option<f64>,
    pub splitting: Splitting,
    pub diffusion: DiffusionSolver,
    pub cfl: f64,
    pub max_drift_substeps: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            dt: None,
            splitting: Splitting::Strang,
            diffusion: DiffusionSolver::ExactSpectral,
            cfl: 0.9,
            max_drift_substeps: 10_000,
        }
    }
}

impl SchemeConfig {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_splitting(mut self, s: Splitting) -> Self {
        self.splitting = s;
        self
    }

    pub fn with_diffusion(mut self, d: DiffusionSolver) -> Self {
        self.diffusion = d;
        self
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }
}

enum Diffusion {
    Spectral { mult: SpectralMultiplier, factor: Vec<f64> },
    Implicit(LU<f64, Dyn, Dyn>),
    Dense(DMatrix<f64>),
}

/// A splitting scheme with everything precomputed for a fixed `dt`.
pub struct Stepper {
    pub grid: Grid,
    pub dt: f64,
    pub splitting: Splitting,
    pub diffusion_solver: DiffusionSolver,
    drift: DriftStencil,
    /// Heun sub-steps per drift phase.
    pub substeps: usize,
    tau: f64,
    diffusion: Diffusion,
}

impl Stepper {
    pub fn new(grid: &Grid, cfg: &OperatorConfig, scheme: &SchemeConfig) -> Result<Stepper> {
        cfg.validate()?;
        if !(scheme.cfl > 0.0 && scheme.cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl = {} outside (0, 1]", scheme.cfl)));
        }
        let drift = DriftStencil::new(grid, &cfg.force);
        let dt = match scheme.dt {
            Some(dt) if dt > 0.0 => dt,
            Some(dt) => return Err(Error::InvalidParameter(format!("dt = {dt} must be positive"))),
            None => {
                let emax = max_speed(grid, cfg);
                if emax > 0.0 {
                    scheme.cfl * grid.h / emax
                } else {
                    1e-2
                }
            }
        };
        let phase = match scheme.splitting {
            Splitting::Lie => dt,
            Splitting::Strang => 0.5 * dt,
        };
        let rate = drift.max_rate();
        let substeps = ((phase * rate / scheme.cfl) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        if substeps > scheme.max_drift_substeps {
            return Err(Error::Cfl { dt, needed: substeps, limit: scheme.max_drift_substeps });
        }
        let diffusion = match scheme.diffusion {
            DiffusionSolver::ExactSpectral => {
                let mult = SpectralMultiplier::new(grid);
                let a = cfg.alpha;
                let factor = mult.frequencies().iter().map(|f| (-f.powf(a) * dt).exp()).collect();
                Diffusion::Spectral { mult, factor }
            }
            DiffusionSolver::ImplicitMatrix | DiffusionSolver::MatrixExponential => {
                if grid.len() > DENSE_LIMIT {
                    return Err(Error::Oversized { size: grid.len(), limit: DENSE_LIMIT });
                }
                let j = Generator::new(grid, cfg)?.jump_matrix()?;
                if scheme.diffusion == DiffusionSolver::ImplicitMatrix {
                    let mut a = j * (-dt);
                    for i in 0..grid.len() {
                        a[(i, i)] += 1.0;
                    }
                    Diffusion::Implicit(a.lu())
                } else {
                    Diffusion::Dense(expm(&j, dt))
                }
            }
        };
        Ok(Stepper {
            grid: *grid,
            dt,
            splitting: scheme.splitting,
            diffusion_solver: scheme.diffusion,
            drift,
            substeps,
            tau: phase / substeps as f64,
            diffusion,
        })
    }

    fn drift_phase(&self, u: &mut [f64]) {
        let tau = self.tau;
        for _ in 0..self.substeps {
            let k1 = self.drift.apply(u);
            let u1: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + tau * b).collect();
            let k2 = self.drift.apply(&u1);
            for ((v, a), b) in u.iter_mut().zip(&u1).zip(&k2) {
                *v = 0.5 * (*v + a + tau * b);
            }
        }
    }

    fn diffuse(&self, u: &[f64]) -> Vec<f64> {
        match &self.diffusion {
            Diffusion::Spectral { mult, factor } => mult.apply_factors(u, factor),
            Diffusion::Implicit(lu) => lu
                .solve(&DVector::from_column_slice(u))
                .map(|x| x.as_slice().to_vec())
                .unwrap_or_else(|| vec![f64::NAN; u.len()]),
            Diffusion::Dense(p) => (p * DVector::from_column_slice(u)).as_slice().to_vec(),
        }
    }

    /// One step on raw values.
    pub fn advance(&self, u: &[f64]) -> Vec<f64> {
        let mut v = u.to_vec();
        match self.splitting {
            Splitting::Lie => {
                self.drift_phase(&mut v);
                self.diffuse(&v)
            }
            Splitting::Strang => {
                self.drift_phase(&mut v);
                let mut w = self.diffuse(&v);
                self.drift_phase(&mut w);
                w
            }
        }
    }

    /// The one-step map as a dense matrix.
    pub fn step_matrix(&self) -> Result<DMatrix<f64>> {
        let len = self.grid.len();
        if len > DENSE_LIMIT {
            return Err(Error::Oversized { size: len, limit: DENSE_LIMIT });
        }
        let mut first = DMatrix::<f64>::zeros(len, len);
        for j in 0..len {
            let mut e = vec![0.0; len];
            e[j] = 1.0;
            self.drift_phase(&mut e);
            first.column_mut(j).copy_from_slice(&e);
        }
        let mut m = match &self.diffusion {
            Diffusion::Dense(p) => p * &first,
            _ => {
                let mut m = DMatrix::<f64>::zeros(len, len);
                for j in 0..len {
                    let col: Vec<f64> = first.column(j).iter().copied().collect();
                    m.column_mut(j).copy_from_slice(&self.diffuse(&col));
                }
                m
            }
        };
        if self.splitting == Splitting::Strang {
            for j in 0..len {
                let mut col: Vec<f64> = m.column(j).iter().copied().collect();
                self.drift_phase(&mut col);
                m.column_mut(j).copy_from_slice(&col);
            }
        }
        Ok(m)
    }
}

/// Largest `|E|` on the grid nodes and boundary faces.
fn max_speed(grid: &Grid, cfg: &OperatorConfig) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..grid.len() {
        let e = cfg.force.eval(grid.node(i));
        m = m.max((e[0] * e[0] + e[1] * e[1]).sqrt());
    }
    let l = grid.l;
    let corner = if grid.d == 1 { [l, 0.0] } else { [l, l] };
    let e = cfg.force.eval(corner);
    m.max((e[0] * e[0] + e[1] * e[1]).sqrt())
}

/// One splitting step.
pub fn step(field: &Field, cfg: &OperatorConfig, scheme: &SchemeConfig) -> Result<Field> {
    let st = Stepper::new(&field.grid, cfg, scheme)?;
    let out = st.advance(&field.values);
    check_finite(&out, st.dt)?;
    Ok(Field::new(field.grid, out))
}

fn check_finite(u: &[f64], t: f64) -> Result<()> {
    match u.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFinite { t, node }),
        None => Ok(()),
    }
}

/// What to record along a run.
#[derive(Clone, Debug)]
pub struct MonitorSpec {
    /// Weight exponent of the `L^p(m)` monitors.
    pub k: f64,
    /// Reference state for the relative entropy monitor.
    pub reference: Option<Field>,
    pub entropy_p: f64,
    /// Record every this many steps (the last step is always recorded).
    pub every: usize,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        MonitorSpec { k: 0.5, reference: None, entropy_p: 2.0, every: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorRow {
    pub t: f64,
    pub mass: f64,
    pub min: f64,
    pub l1m: f64,
    pub l2m: f64,
    pub linfm: f64,
    pub entropy: Option<f64>,
}

fn monitor(t: f64, f: &Field, spec: &MonitorSpec) -> MonitorRow {
    let entropy = spec.reference.as_ref().map(|big| {
        let p = spec.entropy_p;
        let s: f64 = f.values.iter().zip(&big.values).map(|(a, b)| a.abs().powf(p) * b.powf(1.0 - p)).sum();
        s * f.grid.cell_volume()
    });
    MonitorRow {
        t,
        mass: integrate(f),
        min: f.min(),
        l1m: weighted_norm(f, 1.0, spec.k).unwrap_or(f64::NAN),
        l2m: weighted_norm(f, 2.0, spec.k).unwrap_or(f64::NAN),
        linfm: weighted_norm(f, f64::INFINITY, spec.k).unwrap_or(f64::NAN),
        entropy,
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    /// Times of the stored snapshots (completed steps).
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub monitors: Vec<MonitorRow>,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&Field> {
        self.snapshots.last()
    }

    /// Largest relative change of the mass monitor.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.monitors.first() else { return 0.0 };
        let scale = first.mass.abs().max(f64::MIN_POSITIVE);
        self.monitors.iter().map(|m| (m.mass - first.mass).abs() / scale).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.monitors.iter().map(|m| m.min).fold(f64::INFINITY, f64::min)
    }
}

/// Run to `horizon` with default monitors.
pub fn evolve(
    f0: &Field,
    horizon: f64,
    cfg: &OperatorConfig,
    scheme: &SchemeConfig,
    output_times: &[f64],
) -> Result<Trajectory> {
    let st = Stepper::new(&f0.grid, cfg, scheme)?;
    evolve_with(&st, f0, horizon, output_times, &MonitorSpec::default())
}

/// Run a prepared stepper. Snapshots are taken at the completed step nearest
/// to each requested time; the final state is always stored last.
pub fn evolve_with(
    st: &Stepper,
    f0: &Field,
    horizon: f64,
    output_times: &[f64],
    spec: &MonitorSpec,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    if !f0.is_finite() {
        return Err(Error::NonFinite { t: 0.0, node: f0.values.iter().position(|v| !v.is_finite()).unwrap_or(0) });
    }
    let dt = st.dt;
    let nsteps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut wanted: Vec<usize> = output_times
        .iter()
        .filter(|t| **t >= 0.0)
        .map(|t| ((t / dt).round() as usize).min(nsteps))
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    wanted.retain(|&s| s != nsteps);
    let every = spec.every.max(1);
    let mass0 = integrate(f0);
    let scale = f0.values.iter().map(|v| v.abs()).sum::<f64>() * f0.grid.cell_volume();
    let mut traj = Trajectory { dt, times: Vec::new(), snapshots: Vec::new(), monitors: vec![monitor(0.0, f0, spec)] };
    let mut next = wanted.iter().peekable();
    if next.peek() == Some(&&0) {
        traj.times.push(0.0);
        traj.snapshots.push(f0.clone());
        next.next();
    }
    let mut u = f0.values.clone();
    for s in 1..=nsteps {
        u = st.advance(&u);
        let t = s as f64 * dt;
        check_finite(&u, t)?;
        let record = s % every == 0 || s == nsteps;
        let snap = next.peek() == Some(&&s);
        if record || snap {
            let f = Field::new(f0.grid, u.clone());
            let row = monitor(t, &f, spec);
            let drift = (row.mass - mass0).abs() / scale.max(f64::MIN_POSITIVE);
            if drift > MASS_ABORT {
                return Err(Error::MassDrift { drift, limit: MASS_ABORT });
            }
            if record {
                traj.monitors.push(row);
            }
            if snap {
                traj.times.push(t);
                traj.snapshots.push(f);
                next.next();
            }
        }
    }
    traj.times.push(nsteps as f64 * dt);
    traj.snapshots.push(Field::new(f0.grid, u));
    Ok(traj)
}

/// `exp(t M)` of an assembled generator.
pub fn semigroup(m: &GeneratorMatrix, t: f64) -> DMatrix<f64> {
    expm(&m.matrix, t)
}

#[cfg(test)]
mod tests;
