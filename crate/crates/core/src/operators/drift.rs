//! Force fields and the upwind finite-volume discretization of `div(E f)`.

use std::fmt;
use std::sync::Arc;

use crate::grid::{bracket, Field, Grid, Point};

type Rule = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// A force field `E`, with the growth exponent it is declared to have.
#[derive(Clone)]
pub struct ForceField {
    pub gamma: f64,
    pub name: String,
    rule: Option<Rule>,
}

impl fmt::Debug for ForceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ForceField({}, gamma = {})", self.name, self.gamma)
    }
}

/// The canonical field `E(x) = <x>^{gamma-2} x`.
pub fn make_force(gamma: f64) -> ForceField {
    ForceField { gamma, name: format!("canonical(gamma={gamma})"), rule: None }
}

impl ForceField {
    pub fn custom(
        name: &str,
        gamma: f64,
        rule: impl Fn(Point) -> Point + Send + Sync + 'static,
    ) -> ForceField {
        ForceField { gamma, name: name.to_string(), rule: Some(Arc::new(rule)) }
    }

    pub fn zero() -> ForceField {
        ForceField::custom("zero", 0.0, |_| [0.0, 0.0])
    }

    pub fn is_canonical(&self) -> bool {
        self.rule.is_none()
    }

    #[inline]
    pub fn eval(&self, x: Point) -> Point {
        match &self.rule {
            None => {
                let s = bracket(x).powf(self.gamma - 2.0);
                [s * x[0], s * x[1]]
            }
            Some(r) => r(x),
        }
    }

    /// `chi(|x|) E(x)` with a smooth radial cutoff equal to 1 on `B_{1/eps}`
    /// and 0 outside `B_{2/eps}`.
    pub fn truncated(&self, eps: f64) -> ForceField {
        let base = self.clone();
        ForceField::custom(&format!("{}*chi_{eps}", self.name), self.gamma, move |x| {
            let c = radial_cutoff(eps, (x[0] * x[0] + x[1] * x[1]).sqrt());
            let e = base.eval(x);
            [c * e[0], c * e[1]]
        })
    }
}

/// Smooth nonincreasing cutoff: 1 below `1/eps`, 0 above `2/eps`.
pub fn radial_cutoff(eps: f64, r: f64) -> f64 {
    let t = (r * eps - 1.0).clamp(0.0, 1.0);
    // C^2 smoothstep
    1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Empirical constants of the growth and confinement hypotheses.
#[derive(Clone, Debug)]
pub struct ForceReport {
    /// `sup |grad E| / <x>^{gamma-2}`.
    pub grad_ratio: f64,
    /// `inf E.x / (<x>^{gamma-2} |x|^2)` over nodes with `|x| > h`.
    pub confinement_ratio: f64,
    /// Nodes where `E.x < 0`.
    pub negative_nodes: Vec<usize>,
    pub passes: bool,
}

pub fn verify_force_hypotheses(e: &ForceField, gamma: f64, grid: &Grid) -> ForceReport {
    let h = grid.h;
    let mut grad_ratio: f64 = 0.0;
    let mut conf = f64::INFINITY;
    let mut negative = Vec::new();
    for idx in 0..grid.len() {
        let x = grid.node(idx);
        let r2 = x[0] * x[0] + x[1] * x[1];
        let ex = e.eval(x);
        let dot = ex[0] * x[0] + ex[1] * x[1];
        if dot < 0.0 {
            negative.push(idx);
        }
        let w = bracket(x).powf(gamma - 2.0);
        // centred-difference Jacobian, Frobenius norm
        let mut jac2 = 0.0;
        for a in 0..grid.d {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let (ep, em) = (e.eval(xp), e.eval(xm));
            for b in 0..grid.d {
                let dij = (ep[b] - em[b]) / (2.0 * h);
                jac2 += dij * dij;
            }
        }
        grad_ratio = grad_ratio.max(jac2.sqrt() / w);
        if r2.sqrt() > h {
            conf = conf.min(dot / (w * r2));
        }
    }
    let passes = negative.is_empty() && grad_ratio.is_finite() && conf > 0.0;
    ForceReport { grad_ratio, confinement_ratio: conf, negative_nodes: negative, passes }
}

#[derive(Clone, Copy, Debug)]
struct Face {
    left: Option<usize>,
    right: Option<usize>,
    /// Normal component of `E` at the face centre.
    e: f64,
}

impl Face {
    /// Upwind cell for the transport velocity `-E`.
    #[inline]
    fn upwind(&self) -> Option<usize> {
        if self.e > 0.0 {
            self.right
        } else {
            self.left
        }
    }
}

/// First-order upwind finite-volume stencil for `div(E f)` with zero inflow
/// through the box boundary.
#[derive(Clone, Debug)]
pub struct DriftStencil {
    pub grid: Grid,
    faces: Vec<Face>,
}

impl DriftStencil {
    pub fn new(grid: &Grid, e: &ForceField) -> DriftStencil {
        let n = grid.n;
        let mut faces = Vec::new();
        let face_coord = |k: usize| -grid.l + k as f64 * grid.h;
        let cell = |k: usize| if k < n { Some(k) } else { None };
        if grid.d == 1 {
            for k in 0..=n {
                let x = [face_coord(k), 0.0];
                let left = if k == 0 { None } else { Some(k - 1) };
                faces.push(Face { left, right: cell(k), e: e.eval(x)[0] });
            }
        } else {
            for axis in 0..2 {
                for k in 0..=n {
                    for j in 0..n {
                        let idx = |a: usize| if axis == 0 { a * n + j } else { j * n + a };
                        let mut x = [grid.coord(j), grid.coord(j)];
                        x[axis] = face_coord(k);
                        let left = if k == 0 { None } else { Some(idx(k - 1)) };
                        let right = if k < n { Some(idx(k)) } else { None };
                        faces.push(Face { left, right, e: e.eval(x)[axis] });
                    }
                }
            }
        }
        DriftStencil { grid: *grid, faces }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let inv_h = 1.0 / self.grid.h;
        let mut out = vec![0.0; f.len()];
        for face in &self.faces {
            let Some(up) = face.upwind() else { continue };
            let flux = face.e * f[up] * inv_h;
            if let Some(l) = face.left {
                out[l] += flux;
            }
            if let Some(r) = face.right {
                out[r] -= flux;
            }
        }
        out
    }

    /// Transpose of `apply`: the upwind discretization of `-E . grad g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let inv_h = 1.0 / self.grid.h;
        let mut out = vec![0.0; g.len()];
        for face in &self.faces {
            let Some(up) = face.upwind() else { continue };
            let gl = face.left.map_or(0.0, |l| g[l]);
            let gr = face.right.map_or(0.0, |r| g[r]);
            out[up] += face.e * inv_h * (gl - gr);
        }
        out
    }

    /// Diagonal of the stencil (outflow rates, nonpositive).
    pub fn diagonal(&self) -> Vec<f64> {
        let inv_h = 1.0 / self.grid.h;
        let mut diag = vec![0.0; self.grid.len()];
        for face in &self.faces {
            let Some(up) = face.upwind() else { continue };
            if Some(up) == face.left {
                diag[up] += face.e * inv_h;
            } else {
                diag[up] -= face.e * inv_h;
            }
        }
        diag
    }

    /// Largest outflow rate; explicit Euler is positive for `dt <= 1/rate`.
    pub fn max_rate(&self) -> f64 {
        self.diagonal().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Adds the stencil to a dense column-major matrix.
    pub fn add_to(&self, m: &mut nalgebra::DMatrix<f64>) {
        let inv_h = 1.0 / self.grid.h;
        for face in &self.faces {
            let Some(up) = face.upwind() else { continue };
            if let Some(l) = face.left {
                m[(l, up)] += face.e * inv_h;
            }
            if let Some(r) = face.right {
                m[(r, up)] -= face.e * inv_h;
            }
        }
    }
}

pub fn drift_divergence(field: &Field, e: &ForceField) -> Field {
    let st = DriftStencil::new(&field.grid, e);
    Field::new(field.grid, st.apply(&field.values))
}
