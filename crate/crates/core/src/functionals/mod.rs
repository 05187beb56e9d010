//! Weighted norms, nonlocal energies and the inequality checkers.

mod bank;
mod form;
mod inequalities;

pub use bank::smooth_bank;
pub use form::{signed_pow, SymmetricForm};
pub use inequalities::{
    gp_brackets, ipp_check, nash_chain, poincare_wirtinger_check, pw_lemma_check, GpBracket, IppReport, LemmaReport,
    NashReport, NashTerms, PwReport,
};

use crate::error::{Error, Result};
use crate::grid::{bracket, integrate, Field, Grid};
use crate::operators::{ForceField, OperatorConfig};
use crate::operators::kernel::near_correction;
use crate::special::{lattice_zeta, zeta};

/// A named scalar with the parameters it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalValue {
    pub name: String,
    pub value: f64,
    pub parameters: Vec<(String, f64)>,
}

impl FunctionalValue {
    pub fn new(name: &str, value: f64, parameters: &[(&str, f64)]) -> FunctionalValue {
        FunctionalValue {
            name: name.to_string(),
            value,
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// `||u <x>^k||_{L^p}` by the midpoint rule; `p = f64::INFINITY` gives the max norm.
pub fn weighted_norm(field: &Field, p: f64, k: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("norm exponent p = {p} < 1")));
    }
    let g = field.grid;
    let um = field.values.iter().enumerate().map(|(i, v)| (v * bracket(g.node(i)).powf(k)).abs());
    if p.is_infinite() {
        return Ok(um.fold(0.0, f64::max));
    }
    let s: f64 = um.map(|v| v.powf(p)).sum();
    Ok((s * g.cell_volume()).powf(1.0 / p))
}

fn check_same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::InvalidGrid("fields live on different grids".into()));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must lie in (1, inf)")));
    }
    Ok(())
}

/// Pointwise carre du champ `G(u, v)`.
pub fn carre_du_champ(u: &Field, v: &Field, cfg: &OperatorConfig) -> Result<Field> {
    cfg.validate()?;
    check_same_grid(u, v)?;
    let form = SymmetricForm::new(&u.grid, cfg);
    Ok(form.field(form.carre_du_champ(&u.values, &v.values)))
}

/// `int D_p(u)`, the exterior pairs of a zero-extended field included.
pub fn p_dissipation(u: &Field, p: f64, cfg: &OperatorConfig) -> Result<f64> {
    cfg.validate()?;
    check_p(p)?;
    Ok(SymmetricForm::new(&u.grid, cfg).dissipation(&u.values, p))
}

/// Nearest-neighbour correction for `sum |Delta u|^p |o|^{-d-ps}`, exact on
/// linear fields in 1-D and on quadratics for `p = 2`.
fn seminorm_correction(d: usize, s: f64, p: f64) -> f64 {
    if d == 1 {
        -zeta(1.0 + p * s - p)
    } else if p == 2.0 {
        near_correction(2.0 * s, 2)
    } else {
        0.0
    }
}

/// `|u|^p_{W^{s,p}} = 1/2 int int |u(y) - u(x)|^p / |y - x|^{d+ps}` over the whole
/// space for the zero extension of `u`, by a lattice double sum. Returns the `p`-th power.
pub fn sobolev_seminorm(u: &Field, s: f64, p: f64) -> Result<f64> {
    seminorm_sum(u, s, p, true)
}

/// The same double sum restricted to pairs inside the box (the regional seminorm).
pub fn box_seminorm(u: &Field, s: f64, p: f64) -> Result<f64> {
    seminorm_sum(u, s, p, false)
}

fn seminorm_sum(u: &Field, s: f64, p: f64, exterior: bool) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("order s = {s} outside (0, 1)")));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} < 1")));
    }
    use rayon::prelude::*;
    let g = u.grid;
    let (d, n) = (g.d, g.n);
    let df = d as f64;
    let corr = seminorm_correction(d, s, p);
    let sigma = df + p * s;
    let offsets = |a: usize, b: usize| {
        let r2 = (a * a + b * b) as f64;
        let w = r2.powf(-0.5 * sigma);
        if r2 == 1.0 {
            (w + corr).max(0.0)
        } else {
            w
        }
    };
    let table: Vec<f64> = if d == 1 {
        (0..n).map(|a| if a == 0 { 0.0 } else { offsets(a, 0) }).collect()
    } else {
        (0..n * n).map(|k| if k == 0 { 0.0 } else { offsets(k / n, k % n) }).collect()
    };
    let total = if exterior { lattice_zeta(d, sigma) + 2.0 * df * (offsets(1, 0) - 1.0) } else { 0.0 };
    let vals = &u.values;
    let sum: f64 = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let (i1, i2) = g.split(i);
            let (mut pairs, mut row) = (0.0, 0.0);
            for (j, &uj) in vals.iter().enumerate() {
                let (j1, j2) = g.split(j);
                let w = if d == 1 { table[i1.abs_diff(j1)] } else { table[i1.abs_diff(j1) * n + i2.abs_diff(j2)] };
                row += w;
                pairs += w * (uj - vals[i]).abs().powf(p);
            }
            if exterior {
                // both orders of the pairs with one point outside the box
                pairs += 2.0 * (total - row).max(0.0) * vals[i].abs().powf(p);
            }
            pairs
        })
        .sum();
    Ok(0.5 * g.h.powf(2.0 * df - sigma) * sum)
}

/// `phi_{m,p}` with its strict-confinement envelope.
#[derive(Clone, Debug)]
pub struct ConfinementProfile {
    pub phi: Field,
    /// `1 + k / (d + gamma - 2 - k)` when `gamma > 2`.
    pub p_gamma: Option<f64>,
    /// `phi <= b 1_{B_R} - a <x>^{gamma-2}` on the grid, when `gamma > 2` and `p < p_gamma`.
    pub envelope: Option<Envelope>,
    /// False when `gamma > 2` and `p >= p_gamma`.
    pub admissible: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct Envelope {
    pub a: f64,
    pub b: f64,
    pub radius: f64,
}

pub fn p_gamma(d: usize, gamma: f64, k: f64) -> Option<f64> {
    if gamma > 2.0 {
        Some(1.0 + k / (d as f64 + gamma - 2.0 - k))
    } else {
        None
    }
}

/// `div(E)/q - E . grad(m)/m` for `m = <x>^k`, with `div(E)` by centred differences.
pub fn confinement_profile(grid: &Grid, e: &ForceField, k: f64, p: f64) -> Result<ConfinementProfile> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} < 1")));
    }
    let inv_q = 1.0 - 1.0 / p;
    let dx = grid.h;
    let phi = grid.sample(|x| {
        let mut div = 0.0;
        for c in 0..grid.d {
            let (mut xp, mut xm) = (x, x);
            xp[c] += dx;
            xm[c] -= dx;
            div += (e.eval(xp)[c] - e.eval(xm)[c]) / (2.0 * dx);
        }
        let ex = e.eval(x);
        let b2 = bracket(x).powi(2);
        div * inv_q - k * (ex[0] * x[0] + ex[1] * x[1]) / b2
    });
    let gamma = e.gamma;
    let pg = p_gamma(grid.d, gamma, k);
    let admissible = pg.map_or(true, |pg| p < pg);
    let envelope = match pg {
        Some(_) if admissible => {
            // half of the asymptotic slope k - (d + gamma - 2)/q
            let a = 0.5 * (k - (grid.d as f64 + gamma - 2.0) * inv_q);
            let (mut b, mut radius) = (0.0f64, 0.0f64);
            for (i, v) in phi.values.iter().enumerate() {
                let r = v + a * bracket(grid.node(i)).powf(gamma - 2.0);
                if r > 0.0 {
                    b = b.max(r);
                    radius = radius.max(grid.radius(i));
                }
            }
            Some(Envelope { a, b, radius })
        }
        _ => None,
    };
    Ok(ConfinementProfile { phi, p_gamma: pg, envelope, admissible })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyValue {
    /// `int |f|^p F^{1-p}`.
    pub value: f64,
    /// `-p int D_p(f/F) F`, pairs inside the box.
    pub dissipation: f64,
}

/// Relative `p`-entropy of `f` against a positive state `F`.
pub fn relative_entropy(f: &Field, big_f: &Field, p: f64, cfg: &OperatorConfig) -> Result<EntropyValue> {
    check_same_grid(f, big_f)?;
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(format!("entropy exponent p = {p} outside (1, 2]")));
    }
    if let Some(i) = big_f.values.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositive(format!("reference state is {} at node {i}", big_f.values[i])));
    }
    let ratio: Vec<f64> = f.values.iter().zip(&big_f.values).map(|(a, b)| a / b).collect();
    let value = integrate(&Field::new(f.grid, ratio.iter().zip(&big_f.values).map(|(r, b)| r.abs().powf(p) * b).collect()));
    let form = SymmetricForm::new(&f.grid, &cfg.clone().with_exterior(crate::operators::Exterior::Censored));
    let pw: Vec<f64> = ratio.iter().map(|&x| signed_pow(x, p - 1.0)).collect();
    let pairs = form.pair_sum(|i, j| 0.5 * (ratio[j] - ratio[i]) * (pw[j] - pw[i]));
    let diss: f64 = pairs.iter().zip(&big_f.values).map(|(a, b)| a * b).sum::<f64>() * f.grid.cell_volume();
    Ok(EntropyValue { value, dissipation: -p * diss })
}
