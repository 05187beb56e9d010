//! Numeric instances of the dissipation equivalences, integration by parts,
//! the local Poincare-Wirtinger inequality and the Nash chain. Constants are
//! fitted on the data, never assumed.

use crate::error::{Error, Result};
use crate::grid::{bracket, Field};
use crate::operators::OperatorConfig;
use crate::special::kernel_constant;

use super::form::{signed_pow, SymmetricForm};
use super::{sobolev_seminorm, weighted_norm};

/// Range of the nodewise ratio of one expression to `D_p(u)`.
#[derive(Clone, Debug)]
pub struct GpBracket {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub constant: f64,
}

/// Nodewise ratios of `(1/p) I(|u|^p) - u^{p-1} I(u)`, `(1/q) I(|u|^p) - u I(u^{p-1})`
/// and `int kappa |u_*^{p/2} - u^{p/2}|^2` to `D_p(u)`, over a bank of fields.
/// Nodes where `D_p(u) <= 1e-10 max D_p(u)` are skipped.
pub fn gp_brackets(bank: &[Field], p: f64, cfg: &OperatorConfig) -> Result<[GpBracket; 3]> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must lie in (1, inf)")));
    }
    let Some(first) = bank.first() else {
        return Err(Error::InvalidParameter("empty field bank".into()));
    };
    cfg.validate()?;
    let form = SymmetricForm::new(&first.grid, cfg);
    let q = p / (p - 1.0);
    let names = ["bregman", "dual", "gradient"];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [0.0f64; 3];
    for u in bank {
        if u.grid != first.grid {
            return Err(Error::InvalidGrid("bank fields live on different grids".into()));
        }
        let u = &u.values;
        let dp = form.dissipation_field(u, p);
        let abs_p: Vec<f64> = u.iter().map(|x| x.abs().powf(p)).collect();
        let pm1: Vec<f64> = u.iter().map(|&x| signed_pow(x, p - 1.0)).collect();
        let i_abs = form.fraclap(&abs_p);
        let i_u = form.fraclap(u);
        let i_pm1 = form.fraclap(&pm1);
        let grad = form.gradient_form(u, p);
        let floor = 1e-10 * dp.iter().cloned().fold(0.0, f64::max);
        for i in 0..u.len() {
            if dp[i] <= floor {
                continue;
            }
            let e = [
                i_abs[i] / p - pm1[i] * i_u[i],
                i_abs[i] / q - u[i] * i_pm1[i],
                grad[i],
            ];
            for k in 0..3 {
                let r = e[k] / dp[i];
                lo[k] = lo[k].min(r);
                hi[k] = hi[k].max(r);
            }
        }
    }
    Ok(std::array::from_fn(|k| GpBracket {
        name: names[k],
        min: lo[k],
        max: hi[k],
        constant: if lo[k] > 0.0 { hi[k].max(1.0 / lo[k]) } else { f64::INFINITY },
    }))
}

#[derive(Clone, Copy, Debug)]
pub struct IppReport {
    /// `<I(u), v>`.
    pub iu_v: f64,
    /// `<u, I(v)>`.
    pub u_iv: f64,
    /// `-int G(u, v)`.
    pub minus_g: f64,
    /// Largest pairwise difference relative to the largest magnitude.
    pub defect: f64,
}

pub fn ipp_check(u: &Field, v: &Field, cfg: &OperatorConfig) -> Result<IppReport> {
    cfg.validate()?;
    if u.grid != v.grid {
        return Err(Error::InvalidGrid("fields live on different grids".into()));
    }
    let form = SymmetricForm::new(&u.grid, cfg);
    let vol = u.grid.cell_volume();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * vol;
    let iu_v = dot(&form.fraclap(&u.values), &v.values);
    let u_iv = dot(&u.values, &form.fraclap(&v.values));
    let minus_g = -form.integrated_carre_du_champ(&u.values, &v.values);
    let scale = iu_v.abs().max(u_iv.abs()).max(minus_g.abs()).max(f64::MIN_POSITIVE);
    let defect = [(iu_v - u_iv).abs(), (iu_v - minus_g).abs(), (u_iv - minus_g).abs()]
        .into_iter()
        .fold(0.0, f64::max)
        / scale;
    Ok(IppReport { iu_v, u_iv, minus_g, defect })
}

/// Both sides of the local Poincare-Wirtinger inequality on a ball.
#[derive(Clone, Copy, Debug)]
pub struct PwReport {
    /// `int_Omega |v|^p mu`.
    pub lhs: f64,
    /// `C_PW int_Omega D_p(v) mu + eps ||v||^{p-1}_{L^p_mu(Omega)} ||v||_{L^p_mu(Omega^c)}`.
    pub rhs: f64,
    pub c_pw: f64,
    pub eps_omega: f64,
    /// `<v>_mu`, which the inequality assumes to vanish.
    pub mean: f64,
    pub holds: bool,
}

struct Ball {
    inside: Vec<bool>,
    mass_in: f64,
    mass_out: f64,
    mu_max: f64,
    diam: f64,
}

fn ball(mu: &Field, radius: f64) -> Result<Ball> {
    if let Some(i) = mu.values.iter().position(|&m| !(m >= 0.0)) {
        return Err(Error::NonPositive(format!("measure is {} at node {i}", mu.values[i])));
    }
    let g = mu.grid;
    let vol = g.cell_volume();
    let inside: Vec<bool> = (0..g.len()).map(|i| g.radius(i) <= radius).collect();
    let (mut mass_in, mut mass_out, mut mu_max) = (0.0, 0.0, 0.0f64);
    for (m, &ins) in mu.values.iter().zip(&inside) {
        if ins {
            mass_in += m * vol;
            mu_max = mu_max.max(*m);
        } else {
            mass_out += m * vol;
        }
    }
    if !(mass_in > 0.0) {
        return Err(Error::InvalidParameter(format!("mu(Omega) = 0 on the ball of radius {radius}")));
    }
    Ok(Ball { inside, mass_in, mass_out, mu_max, diam: 2.0 * radius })
}

/// The inequality for `<v>_mu = 0`, with `C_PW = diam^{d+alpha} ||mu||_{L^inf(Omega)}`
/// expressed for the normalized kernel (divided by `c_{alpha,d}`).
pub fn poincare_wirtinger_check(
    v: &Field,
    mu: &Field,
    radius: f64,
    p: f64,
    cfg: &OperatorConfig,
    tol: f64,
) -> Result<PwReport> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must lie in (1, inf)")));
    }
    if v.grid != mu.grid {
        return Err(Error::InvalidGrid("fields live on different grids".into()));
    }
    cfg.validate()?;
    let b = ball(mu, radius)?;
    let g = v.grid;
    let vol = g.cell_volume();
    let form = SymmetricForm::new(&g, cfg);
    let dp = form.dissipation_field(&v.values, p);
    let c_pw = b.diam.powf(g.d as f64 + cfg.alpha) * b.mu_max / kernel_constant(cfg.alpha, g.d);
    let eps_omega = b.mass_out / b.mass_in;
    let (mut lhs, mut diss, mut out_p, mut mean) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..g.len() {
        let (vi, mi) = (v.values[i], mu.values[i]);
        mean += vi * mi * vol;
        if b.inside[i] {
            lhs += vi.abs().powf(p) * mi * vol;
            diss += dp[i] * mi * vol;
        } else {
            out_p += vi.abs().powf(p) * mi * vol;
        }
    }
    let rhs = c_pw * diss + eps_omega * lhs.powf((p - 1.0) / p) * out_p.powf(1.0 / p);
    let mean = mean / (b.mass_in + b.mass_out);
    Ok(PwReport { lhs, rhs, c_pw, eps_omega, mean, holds: lhs <= rhs * (1.0 + tol) })
}

/// The local form `0 <= int_Omega u^{p-1}(u - <u>_{mu,Omega}) mu <= C int_Omega D_p(u) mu`.
#[derive(Clone, Copy, Debug)]
pub struct LemmaReport {
    pub middle: f64,
    pub rhs: f64,
    /// `diam^{d+alpha} ||mu||_inf / mu(Omega)`, over `c_{alpha,d}`.
    pub c_pw: f64,
    pub holds: bool,
}

pub fn pw_lemma_check(u: &Field, mu: &Field, radius: f64, p: f64, cfg: &OperatorConfig, tol: f64) -> Result<LemmaReport> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must lie in (1, inf)")));
    }
    if u.grid != mu.grid {
        return Err(Error::InvalidGrid("fields live on different grids".into()));
    }
    cfg.validate()?;
    let b = ball(mu, radius)?;
    let g = u.grid;
    let vol = g.cell_volume();
    let form = SymmetricForm::new(&g, cfg);
    let dp = form.dissipation_field(&u.values, p);
    let c_pw = b.diam.powf(g.d as f64 + cfg.alpha) * b.mu_max / b.mass_in / kernel_constant(cfg.alpha, g.d);
    let local_mean: f64 = (0..g.len()).filter(|&i| b.inside[i]).map(|i| u.values[i] * mu.values[i] * vol).sum::<f64>() / b.mass_in;
    let (mut middle, mut diss) = (0.0, 0.0);
    for i in (0..g.len()).filter(|&i| b.inside[i]) {
        let ui = u.values[i];
        middle += signed_pow(ui, p - 1.0) * (ui - local_mean) * mu.values[i] * vol;
        diss += dp[i] * mu.values[i] * vol;
    }
    let rhs = c_pw * diss;
    let slack = tol * rhs.abs().max(middle.abs()) + 1e-14;
    Ok(LemmaReport { middle, rhs, c_pw, holds: middle >= -slack && middle <= rhs * (1.0 + tol) + 1e-14 })
}

/// Terms of the Nash chain for one field.
#[derive(Clone, Copy, Debug)]
pub struct NashTerms {
    /// `int I(u) u^{p-1} m^p`.
    pub lhs: f64,
    /// `||u||^p_{L^p(m)}`.
    pub norm_p: f64,
    /// `|(um)^{p/2}|^2_{H^{alpha/2}}`.
    pub seminorm: f64,
    /// `||u||^{p + q alpha/d}_{L^p(m)} ||u||^{-q alpha/d}_{L^1(m)}`.
    pub gn: f64,
}

#[derive(Clone, Debug)]
pub struct NashReport {
    pub theta: f64,
    /// Fitted Gagliardo-Nirenberg constant: `min seminorm / gn` over the bank.
    pub c_gn: f64,
    /// Coefficient of the seminorm in the first inequality.
    pub c1: f64,
    /// Fitted `C_{k,p}`.
    pub big_c: f64,
    pub terms: Vec<NashTerms>,
    /// The combined inequality `lhs <= C ||u||^p - c1 c_gn gn` on every field.
    pub holds: bool,
}

/// Fit the constants of the Nash chain on a bank. `bracket` is the constant of
/// the `D_p` / seminorm equivalence; the seminorm coefficient is `c_{alpha,d}`
/// over twice that bracket.
pub fn nash_chain(bank: &[Field], p: f64, k: f64, cfg: &OperatorConfig, bracket_c: f64) -> Result<NashReport> {
    if !(1.0 < p && p <= 2.0) {
        return Err(Error::InvalidParameter(format!("Nash exponent p = {p} outside (1, 2]")));
    }
    let Some(first) = bank.first() else {
        return Err(Error::InvalidParameter("empty field bank".into()));
    };
    cfg.validate()?;
    let g = first.grid;
    let d = g.d as f64;
    let q = p / (p - 1.0);
    let theta = p / (p + q * cfg.alpha / d);
    let form = SymmetricForm::new(&g, cfg);
    let m: Vec<f64> = (0..g.len()).map(|i| bracket(g.node(i)).powf(k)).collect();
    let vol = g.cell_volume();
    let mut terms = Vec::with_capacity(bank.len());
    for u in bank {
        let iu = form.fraclap(&u.values);
        let lhs: f64 = (0..g.len()).map(|i| iu[i] * signed_pow(u.values[i], p - 1.0) * m[i].powf(p)).sum::<f64>() * vol;
        let lp = weighted_norm(u, p, k)?;
        let l1 = weighted_norm(u, 1.0, k)?;
        let um = Field::new(g, (0..g.len()).map(|i| signed_pow(u.values[i] * m[i], 0.5 * p)).collect());
        let seminorm = sobolev_seminorm(&um, 0.5 * cfg.alpha, 2.0)?;
        let gn = lp.powf(p / theta) * l1.powf(-p * (1.0 / theta - 1.0));
        terms.push(NashTerms { lhs, norm_p: lp.powf(p), seminorm, gn });
    }
    let c_gn = terms.iter().map(|t| t.seminorm / t.gn).fold(f64::INFINITY, f64::min);
    let c1 = kernel_constant(cfg.alpha, g.d) / (2.0 * bracket_c);
    let big_c = terms.iter().map(|t| (t.lhs + c1 * t.seminorm) / t.norm_p).fold(0.0, f64::max);
    let holds = c_gn > 0.0
        && big_c.is_finite()
        && terms.iter().all(|t| t.lhs <= big_c * t.norm_p - c1 * c_gn * t.gn + 1e-12 * t.norm_p.max(t.lhs.abs()));
    Ok(NashReport { theta, c_gn, c1, big_c, terms, holds })
}
