//! Discrete generators `Lambda f = I(f) + div(E f)` and their pieces.

pub mod drift;
pub mod kernel;
pub mod spectral;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{bracket, Field, Grid};
use crate::special::{ball_volume, gauss_legendre, kernel_constant, lattice_zeta, sphere_area};

pub use drift::{drift_divergence, make_force, verify_force_hypotheses, DriftStencil, ForceField, ForceReport};
pub use kernel::{Exterior, LatticeKernel};
pub use spectral::{spectral_fraclap, SpectralMultiplier};

use spectral::check_alpha;

/// Largest number of unknowns for dense assembly.
pub const DENSE_LIMIT: usize = 4096;

/// Boundary-to-peak ratio above which truncation errors are not controlled.
pub const BOUNDARY_DECAY: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Spectral,
    Quadrature,
}

#[derive(Clone, Debug)]
pub struct OperatorConfig {
    pub alpha: f64,
    pub force: ForceField,
    pub method: Method,
    /// Near/far cut; `None` means one cell.
    pub split_radius: Option<f64>,
    pub exterior: Exterior,
}

impl OperatorConfig {
    /// Quadrature operator with the canonical force, reinjecting exterior jumps.
    pub fn new(alpha: f64, gamma: f64) -> OperatorConfig {
        OperatorConfig {
            alpha,
            force: make_force(gamma),
            method: Method::Quadrature,
            split_radius: None,
            exterior: Exterior::Reinjected,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_exterior(mut self, exterior: Exterior) -> Self {
        self.exterior = exterior;
        self
    }

    pub fn with_force(mut self, force: ForceField) -> Self {
        self.force = force;
        self
    }

    pub fn with_split_radius(mut self, r: f64) -> Self {
        self.split_radius = Some(r);
        self
    }

    pub fn gamma(&self) -> f64 {
        self.force.gamma
    }

    pub fn norm_constant(&self, d: usize) -> f64 {
        kernel_constant(self.alpha, d)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)
    }
}

fn check_decay(field: &Field) -> Result<()> {
    let peak = field.max_abs();
    if peak == 0.0 {
        return Ok(());
    }
    let ratio = field.boundary_max_abs() / peak;
    if ratio > BOUNDARY_DECAY {
        return Err(Error::BoundaryDecay { ratio, limit: BOUNDARY_DECAY });
    }
    Ok(())
}

/// Singular-integral fractional Laplacian on the lattice.
pub fn quadrature_fraclap(field: &Field, cfg: &OperatorConfig) -> Result<Field> {
    cfg.validate()?;
    if cfg.exterior != Exterior::Periodic {
        check_decay(field)?;
    }
    let k = LatticeKernel::new(&field.grid, cfg.alpha, cfg.exterior);
    Ok(Field::new(field.grid, k.apply(&field.values)))
}

/// Near and far parts of the kernel split at radius `r`.
#[derive(Clone, Debug)]
pub struct SplitParts {
    pub near: Field,
    pub far: Field,
    /// Lattice convolution `kappa^c * u`.
    pub conv: Field,
    /// `||kappa^c||_{L^1}`, analytic.
    pub kc: f64,
    /// Lattice counterpart of `kc` used by `far`.
    pub kc_lattice: f64,
}

/// Splits the quadrature operator into `I_chi` and `kappa^c * u - K^c u`.
pub fn split_fraclap(field: &Field, cfg: &OperatorConfig, r: f64) -> Result<SplitParts> {
    use rayon::prelude::*;
    cfg.validate()?;
    let grid = field.grid;
    if !(r > 0.0 && r < grid.l) {
        return Err(Error::InvalidParameter(format!("split radius {r} outside (0, L)")));
    }
    let tail_on = match cfg.exterior {
        Exterior::ZeroExtension => true,
        Exterior::Censored => false,
        other => {
            return Err(Error::InvalidParameter(format!("split_fraclap needs a zero or censored exterior, got {other:?}")))
        }
    };
    check_decay(field)?;
    let d = grid.d;
    let alpha = cfg.alpha;
    let lk = LatticeKernel::new(&grid, alpha, cfg.exterior);
    let p = d as f64 + alpha;
    let rho = r / grid.h;
    let cap = rho.powf(-p);
    let far_w = |o2: f64| if o2 == 0.0 { cap } else { o2.powf(-0.5 * p).min(cap) };
    // lattice K^c: W^c(0) + sum_{o != 0} W^c(o)
    let zeta_sum = lattice_zeta(d, p);
    let reach = rho.ceil() as i64;
    let mut inner = 0.0;
    let range2 = if d == 2 { -reach..=reach } else { 0..=0 };
    for o1 in -reach..=reach {
        for o2 in range2.clone() {
            let s2 = (o1 * o1 + o2 * o2) as f64;
            if s2 > 0.0 && s2.sqrt() < rho {
                inner += s2.powf(-0.5 * p) - cap;
            }
        }
    }
    let kc_lattice = lk.scale * (cap + zeta_sum - inner);
    let kc = kernel_constant(alpha, d) * r.powf(-alpha) * (ball_volume(d) + sphere_area(d) / alpha);
    let u = &field.values;
    let len = grid.len();
    let n = grid.n as i64;
    let rows: Vec<(f64, f64, f64)> = (0..len)
        .into_par_iter()
        .map(|i| {
            let (i1, i2) = grid.split(i);
            let mut near = 0.0;
            let mut conv = 0.0;
            let mut far_rows = 0.0;
            for j in 0..len {
                let (j1, j2) = grid.split(j);
                let (o1, o2) = (i1 as f64 - j1 as f64, i2 as f64 - j2 as f64);
                let s2 = o1 * o1 + o2 * o2;
                let wc = lk.scale * far_w(s2);
                conv += wc * u[j];
                if j != i {
                    far_rows += wc;
                    near += (lk.weight(i, j) - wc) * (u[j] - u[i]);
                }
            }
            if tail_on {
                // near-kernel mass that falls outside the box
                let mut ext = 0.0;
                for o1 in -reach..=reach {
                    for o2 in range2.clone() {
                        let (a, b) = (i1 as i64 + o1, i2 as i64 + o2);
                        let inside = a >= 0 && a < n && (d == 1 || (b >= 0 && b < n));
                        let s2 = (o1 * o1 + o2 * o2) as f64;
                        if inside || s2 == 0.0 {
                            continue;
                        }
                        let mut w = if s2.sqrt() < rho { s2.powf(-0.5 * p) - cap } else { 0.0 };
                        if s2 == 1.0 {
                            w += lk.nn;
                        }
                        ext += w;
                    }
                }
                near -= lk.scale * ext * u[i];
                (near, conv, conv - kc_lattice * u[i])
            } else {
                (near, conv, conv - (far_rows + lk.scale * cap) * u[i])
            }
        })
        .collect();
    Ok(SplitParts {
        near: Field::new(grid, rows.iter().map(|r| r.0).collect()),
        far: Field::new(grid, rows.iter().map(|r| r.2).collect()),
        conv: Field::new(grid, rows.iter().map(|r| r.1).collect()),
        kc,
        kc_lattice,
    })
}

/// Fractional Laplacian of the weight `<x>^k` in one dimension, `k < alpha`.
///
/// The weight does not decay, so the exterior of the box is integrated
/// analytically along `y - x = (L - |x|)/t` with Gauss-Legendre in `t^{1/q}`.
pub fn weight_action(grid: &Grid, k: f64, alpha: f64) -> Result<Field> {
    check_alpha(alpha)?;
    if grid.d != 1 {
        return Err(Error::InvalidParameter("weight_action is implemented for d = 1".into()));
    }
    if k >= alpha {
        return Err(Error::InvalidParameter(format!("weight exponent k = {k} must be < alpha = {alpha}")));
    }
    let lk = LatticeKernel::new(grid, alpha, Exterior::Censored);
    let m = crate::grid::weight_field(grid, k);
    let mut out = lk.apply(&m.values);
    let c = kernel_constant(alpha, 1);
    let mf = |y: f64| (1.0 + y * y).powf(0.5 * k);
    let n = grid.n;
    let h = grid.h;
    // nearest-neighbour correction towards the missing outside neighbours
    out[0] += lk.scale * lk.nn * (mf(grid.coord(0) - h) - m.values[0]);
    out[n - 1] += lk.scale * lk.nn * (mf(grid.coord(n - 1) + h) - m.values[n - 1]);
    // int_0^1 m(x + D/t) t^{alpha-1} dt in s = t^{alpha-k}: bounded integrand,
    // then geometric panels towards s = 0
    let (gx, gw) = gauss_legendre(12);
    let q = 1.0 / (alpha - k);
    let mut nodes = Vec::new();
    for level in 0..40 {
        let (lo, hi) = (0.5f64.powi(level + 1), 0.5f64.powi(level));
        for (x, w) in gx.iter().zip(&gw) {
            let s = lo + 0.5 * (x + 1.0) * (hi - lo);
            nodes.push((s.powf(q), 0.5 * w * (hi - lo) * q));
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        let x = grid.coord(i);
        let mx = m.values[i];
        let mut acc = 0.0;
        for sign in [1.0, -1.0] {
            let dist = grid.l - sign * x;
            let mut int = 0.0;
            for &(t, w) in &nodes {
                // t^{alpha-1} dt = q t^{k} ds
                int += w * t.powf(k) * mf(x + sign * dist / t);
            }
            acc += dist.powf(-alpha) * (int - mx / alpha);
        }
        *o += c * acc;
    }
    Ok(Field::new(*grid, out))
}

enum JumpPart {
    Lattice(LatticeKernel),
    Spectral(SpectralMultiplier),
}

/// A generator built once for repeated application.
pub struct Generator {
    pub grid: Grid,
    pub cfg: OperatorConfig,
    jump: JumpPart,
    pub drift: DriftStencil,
}

impl Generator {
    pub fn new(grid: &Grid, cfg: &OperatorConfig) -> Result<Generator> {
        cfg.validate()?;
        let jump = match cfg.method {
            Method::Quadrature => JumpPart::Lattice(LatticeKernel::new(grid, cfg.alpha, cfg.exterior)),
            Method::Spectral => JumpPart::Spectral(SpectralMultiplier::new(grid)),
        };
        Ok(Generator { grid: *grid, cfg: cfg.clone(), jump, drift: DriftStencil::new(grid, &cfg.force) })
    }

    pub fn lattice(&self) -> Option<&LatticeKernel> {
        match &self.jump {
            JumpPart::Lattice(k) => Some(k),
            JumpPart::Spectral(_) => None,
        }
    }

    pub fn jump(&self, u: &[f64]) -> Vec<f64> {
        match &self.jump {
            JumpPart::Lattice(k) => k.apply(u),
            JumpPart::Spectral(s) => {
                let a = self.cfg.alpha;
                s.apply(u, |f| if f == 0.0 { 0.0 } else { -f.powf(a) })
            }
        }
    }

    pub fn jump_transpose(&self, g: &[f64]) -> Vec<f64> {
        match &self.jump {
            JumpPart::Lattice(k) => k.apply_transpose(g),
            JumpPart::Spectral(_) => self.jump(g),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.jump(u);
        for (o, v) in out.iter_mut().zip(self.drift.apply(u)) {
            *o += v;
        }
        out
    }

    pub fn apply_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let mut out = self.jump_transpose(g);
        for (o, v) in out.iter_mut().zip(self.drift.apply_transpose(g)) {
            *o += v;
        }
        out
    }

    /// Dense jump matrix.
    pub fn jump_matrix(&self) -> Result<DMatrix<f64>> {
        let len = self.grid.len();
        if len > DENSE_LIMIT {
            return Err(Error::Oversized { size: len, limit: DENSE_LIMIT });
        }
        Ok(match &self.jump {
            JumpPart::Lattice(k) => k.dense(),
            JumpPart::Spectral(_) => {
                let mut m = DMatrix::zeros(len, len);
                let mut e = vec![0.0; len];
                for j in 0..len {
                    e[j] = 1.0;
                    let col = self.jump(&e);
                    m.column_mut(j).copy_from_slice(&col);
                    e[j] = 0.0;
                }
                m
            }
        })
    }

    pub fn matrix(&self, which: Which) -> Result<GeneratorMatrix> {
        let mut m = self.jump_matrix()?;
        self.drift.add_to(&mut m);
        if which == Which::Adjoint {
            m.transpose_mut();
        }
        Ok(GeneratorMatrix { grid: self.grid, which, matrix: m })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Forward,
    Adjoint,
}

#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    pub grid: Grid,
    pub which: Which,
    pub matrix: DMatrix<f64>,
}

impl GeneratorMatrix {
    /// Largest absolute column sum of the forward form, relative to the matrix 1-norm.
    pub fn conservation_defect(&self) -> f64 {
        let m = match self.which {
            Which::Forward => self.matrix.clone(),
            Which::Adjoint => self.matrix.transpose(),
        };
        let norm = one_norm(&m);
        let worst = (0..m.ncols()).map(|j| m.column(j).sum().abs()).fold(0.0, f64::max);
        worst / norm
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> f64 {
        let m = &self.matrix;
        let mut lo = f64::INFINITY;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if i != j {
                    lo = lo.min(m[(i, j)]);
                }
            }
        }
        lo
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.matrix * nalgebra::DVector::from_column_slice(u);
        v.as_slice().to_vec()
    }
}

pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn generator_apply(field: &Field, cfg: &OperatorConfig) -> Result<Field> {
    if cfg.method == Method::Quadrature && cfg.exterior != Exterior::Periodic {
        check_decay(field)?;
    }
    let g = Generator::new(&field.grid, cfg)?;
    Ok(Field::new(field.grid, g.apply(&field.values)))
}

pub fn adjoint_apply(field: &Field, cfg: &OperatorConfig) -> Result<Field> {
    let g = Generator::new(&field.grid, cfg)?;
    Ok(Field::new(field.grid, g.apply_adjoint(&field.values)))
}

pub fn assemble_generator_matrix(grid: &Grid, cfg: &OperatorConfig, which: Which) -> Result<GeneratorMatrix> {
    let len = grid.len();
    if len > DENSE_LIMIT {
        return Err(Error::Oversized { size: len, limit: DENSE_LIMIT });
    }
    Generator::new(grid, cfg)?.matrix(which)
}

/// Lower-bound constant for `kappa^c * u` with the normalized kernel:
/// `c_{alpha,d} (sqrt 2 max(r, R, 1))^{-(d+alpha)}`.
pub fn far_lower_bound_constant(alpha: f64, d: usize, r: f64, big_r: f64) -> f64 {
    kernel_constant(alpha, d) * (2f64.sqrt() * r.max(big_r).max(1.0)).powf(-(d as f64 + alpha))
}

/// `<x>^{-(d+alpha)}` helper used by lower-bound checks.
pub fn tail_template(grid: &Grid, alpha: f64) -> Field {
    let p = grid.d as f64 + alpha;
    grid.sample(|x| bracket(x).powf(-p))
}
