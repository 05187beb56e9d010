//! Decay-rate fitting and the convergence diagnostics built on it.

mod markov;

pub use markov::{
    b_semigroup_decay, harris_bank, harris_contraction, harris_seminorm, lyapunov_check, m_lambda, shifted_sup_norm,
    subadditivity, tune_lambda, BSemigroupReport, HARRIS_LIMIT, HarrisReport, LyapunovEnvelope, LyapunovReport, Subadditivity,
};

use std::fmt;

use crate::error::{Error, Result};
use crate::evolution::{evolve_with, MonitorSpec, SchemeConfig, Stepper};
use crate::functionals::weighted_norm;
use crate::grid::{Field, Grid};
use crate::operators::OperatorConfig;
use crate::steady::scheme_fixed_point;

/// Least-squares line `y = slope x + intercept`.
#[derive(Clone, Copy, Debug)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept: my - slope * mx, r2 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// `C e^{-a t}`.
    Exponential,
    /// `C <t>^{-rho}`.
    Polynomial,
    /// `C t^{slope}`, fitted in log-log coordinates.
    PowerLaw,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Exponential => "exponential",
            Model::Polynomial => "polynomial",
            Model::PowerLaw => "power-law",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    BoundRespected,
    Violated,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::BoundRespected
        } else {
            Verdict::Violated
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::BoundRespected
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::BoundRespected => "bound-respected",
            Verdict::Violated => "violated",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub name: String,
    pub model: Model,
    /// `a`, `rho`, or the log-log slope.
    pub fitted: f64,
    pub predicted: Option<f64>,
    pub window: (f64, f64),
    pub r2: f64,
    /// Envelope prefactor, fitted at the start of the window.
    pub prefactor: f64,
    pub tol: f64,
    pub points: usize,
    pub verdict: Verdict,
}

impl RateReport {
    pub fn csv_header() -> &'static str {
        "name,model,fitted,predicted,t0,t1,r2,prefactor,tol,points,verdict"
    }

    /// One CSV row, floats with 17 significant digits.
    pub fn csv_row(&self) -> String {
        let g = |v: f64| format!("{v:.16e}");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.name,
            self.model,
            g(self.fitted),
            self.predicted.map(g).unwrap_or_default(),
            g(self.window.0),
            g(self.window.1),
            g(self.r2),
            g(self.prefactor),
            g(self.tol),
            self.points,
            self.verdict
        )
    }

    pub fn named(mut self, name: &str) -> RateReport {
        self.name = name.to_string();
        self
    }
}

fn bracket_t(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

fn model_value(model: Model, rate: f64, t: f64) -> f64 {
    match model {
        Model::Exponential => (-rate * t).exp(),
        Model::Polynomial => bracket_t(t).powf(-rate),
        Model::PowerLaw => t.powf(rate),
    }
}

/// Fit a decay model on the points of `series` inside `window`.
///
/// Exponential and polynomial fits are upper-bound checks: the verdict holds
/// iff every point stays below `C model(t) (1 + tol)`, with the predicted rate
/// (or rate 0 and `fitted > 0` when none is given) and `C` taken at the first
/// point. Power-law fits compare the slope: `|fitted - predicted| <= tol`.
pub fn decay_fit(series: &[(f64, f64)], model: Model, window: (f64, f64), predicted: Option<f64>, tol: f64) -> Result<RateReport> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if pts.len() < 10 {
        return Err(Error::Fit(format!("{} points in window [{}, {}], need 10", pts.len(), window.0, window.1)));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Fit(format!("nonpositive value {v} at t = {t}")));
    }
    let x: Vec<f64> = pts
        .iter()
        .map(|(t, _)| match model {
            Model::Exponential => *t,
            Model::Polynomial => bracket_t(*t).ln(),
            Model::PowerLaw => t.ln(),
        })
        .collect();
    if model == Model::PowerLaw && pts[0].0 <= 0.0 {
        return Err(Error::Fit("power-law window must start at t > 0".into()));
    }
    let y: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::Fit("degenerate window".into()));
    }
    let fit = linear_fit(&x, &y);
    let fitted = if model == Model::PowerLaw { fit.slope } else { -fit.slope };
    let (t0, v0) = pts[0];
    let (prefactor, ok) = match (model, predicted) {
        (Model::PowerLaw, Some(p)) => (fit.intercept.exp(), (fitted - p).abs() <= tol),
        (Model::PowerLaw, None) => (fit.intercept.exp(), true),
        (_, pred) => {
            let rate = pred.unwrap_or(0.0);
            let c = v0 / model_value(model, rate, t0);
            let below = pts.iter().all(|(t, v)| *v <= c * model_value(model, rate, *t) * (1.0 + tol));
            (c, below && (pred.is_some() || fitted > 0.0))
        }
    };
    Ok(RateReport {
        name: String::new(),
        model,
        fitted,
        predicted,
        window,
        r2: fit.r2,
        prefactor,
        tol,
        points: pts.len(),
        verdict: Verdict::from_bool(ok),
    })
}

/// `true` iff `X(t) <= e^{-bt} A^{-1/C} ((B - b) + 1/(Ct))^{1/C}` at every sample with `t > 0`.
pub fn ode_envelope_check(series: &[(f64, f64)], a: f64, b_big: f64, c: f64, b: f64) -> bool {
    series.iter().filter(|(t, _)| *t > 0.0).all(|&(t, x)| {
        let env = (-b * t).exp() * a.powf(-1.0 / c) * ((b_big - b) + 1.0 / (c * t)).powf(1.0 / c);
        x <= env * (1.0 + 1e-12)
    })
}

/// `l` points evenly spaced in `log t` over `[t0, t1]`.
pub fn log_times(t0: f64, t1: f64, l: usize) -> Vec<f64> {
    let (a, b) = (t0.ln(), t1.ln());
    (0..l).map(|i| (a + (b - a) * i as f64 / (l - 1).max(1) as f64).exp()).collect()
}

/// A normalized bump on the nodes within one cell of the origin (width `2h`).
pub fn near_delta(grid: &Grid) -> Field {
    let f = grid.sample(|x| if x[0].abs() <= grid.h && x[1].abs() <= grid.h { 1.0 } else { 0.0 });
    f.normalized()
}

/// `(t, ||f(t) - F||_{L^p(<x>^k)})` at the completed steps nearest to `times`.
pub fn distance_series(st: &Stepper, f0: &Field, big_f: &Field, p: f64, k: f64, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let tr = evolve_with(st, f0, horizon, times, &MonitorSpec { every: usize::MAX, ..MonitorSpec::default() })?;
    tr.times
        .iter()
        .zip(&tr.snapshots)
        .map(|(t, f)| Ok((*t, weighted_norm(&f.sub(big_f), p, k)?)))
        .collect()
}

/// `(t, ||f(t)||_{L^p(<x>^k)})` along a run.
pub fn norm_series(st: &Stepper, f0: &Field, p: f64, k: f64, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let zero = f0.grid.zeros();
    distance_series(st, f0, &zero, p, k, times)
}

/// Small-time regularization experiment from a near-delta.
#[derive(Clone, Debug)]
pub struct RegularizationSetup {
    pub grid: Grid,
    pub cfg: OperatorConfig,
    pub scheme: SchemeConfig,
    pub k: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Absolute tolerance on the slope.
    pub tol: f64,
}

fn regularization(setup: &RegularizationSetup, p: f64, predicted: f64, name: &str) -> Result<RateReport> {
    let st = Stepper::new(&setup.grid, &setup.cfg, &setup.scheme)?;
    let (t0, t1) = setup.window;
    if t0 < 10.0 * st.dt {
        return Err(Error::InvalidParameter(format!("window start {t0} is below 10 dt = {}", 10.0 * st.dt)));
    }
    let times = log_times(t0, t1, setup.samples);
    let series = norm_series(&st, &near_delta(&setup.grid), p, setup.k, &times)?;
    let eps = 1e-9 * t1;
    Ok(decay_fit(&series, Model::PowerLaw, (t0 - eps - 0.5 * st.dt, t1 + eps + 0.5 * st.dt), Some(predicted), setup.tol)?.named(name))
}

/// Log-log slope of `||f(t)||_{L^p(m)}` against the predicted `-d/(q alpha)`.
pub fn regularization_slope(p: f64, setup: &RegularizationSetup) -> Result<RateReport> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must lie in (1, inf)")));
    }
    let q = p / (p - 1.0);
    let predicted = -(setup.grid.d as f64) / (q * setup.cfg.alpha);
    regularization(setup, p, predicted, &format!("regularization-L{p}"))
}

/// Log-log slope of `||f(t)||_{L^inf(m)}` against `-d/alpha`; needs `gamma <= 2`.
pub fn linf_regularization_slope(setup: &RegularizationSetup) -> Result<RateReport> {
    if setup.cfg.gamma() > 2.0 {
        return Err(Error::Hypothesis(format!("L^inf regularization needs gamma <= 2, got {}", setup.cfg.gamma())));
    }
    let predicted = -(setup.grid.d as f64) / setup.cfg.alpha;
    regularization(setup, f64::INFINITY, predicted, "regularization-Linf")
}

/// Convergence of `||f(t) - F||_{L^p(m)}` to the scheme's own fixed point.
#[derive(Clone, Debug)]
pub struct ConvergenceSetup {
    pub grid: Grid,
    pub cfg: OperatorConfig,
    pub scheme: SchemeConfig,
    pub p: f64,
    pub k: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceOutcome {
    pub report: RateReport,
    pub series: Vec<(f64, f64)>,
    pub steady: Field,
}

/// Exponential regime: `f0` is a displaced normalized Gaussian.
pub fn exponential_rate_check(setup: &ConvergenceSetup) -> Result<ConvergenceOutcome> {
    if setup.cfg.gamma() < 2.0 {
        return Err(Error::Hypothesis(format!("exponential convergence needs gamma >= 2, got {}", setup.cfg.gamma())));
    }
    let st = Stepper::new(&setup.grid, &setup.cfg, &setup.scheme)?;
    let big_f = scheme_fixed_point(&st, &setup.cfg)?.f;
    let s = 0.1 * setup.grid.l;
    let c = 0.15 * setup.grid.l;
    let f0 = setup.grid.sample(|x| (-((x[0] - c).powi(2) + x[1] * x[1]) / (2.0 * s * s)).exp()).normalized();
    let (t0, t1) = setup.window;
    let times: Vec<f64> = (0..setup.samples).map(|i| t0 + (t1 - t0) * i as f64 / (setup.samples - 1) as f64).collect();
    let series = distance_series(&st, &f0, &big_f, setup.p, setup.k, &times)?;
    let pad = 0.5 * st.dt + 1e-9;
    let report = decay_fit(&series, Model::Exponential, (t0 - pad, t1 + pad), None, setup.tol)?.named("exponential-rate");
    Ok(ConvergenceOutcome { report, series, steady: big_f })
}

/// Polynomial regime: heavy initial weight `k_heavy`, measured weight `k_light`.
#[derive(Clone, Debug)]
pub struct PolynomialSetup {
    pub grid: Grid,
    pub cfg: OperatorConfig,
    pub scheme: SchemeConfig,
    pub k_heavy: f64,
    pub k_light: f64,
    pub p: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct PolynomialOutcome {
    pub report: RateReport,
    pub series: Vec<(f64, f64)>,
    /// Hypotheses of the sharper statement that this setup does not meet.
    pub unmet: Vec<String>,
}

/// `(k_heavy - k_light) / |2 - gamma|`.
pub fn predicted_polynomial_exponent(gamma: f64, k_heavy: f64, k_light: f64) -> f64 {
    (k_heavy - k_light) / (2.0 - gamma).abs()
}

pub fn polynomial_rate_check(setup: &PolynomialSetup) -> Result<PolynomialOutcome> {
    let (alpha, gamma) = (setup.cfg.alpha, setup.cfg.gamma());
    let d = setup.grid.d as f64;
    let (kh, kl, p) = (setup.k_heavy, setup.k_light, setup.p);
    if !(gamma > 2.0 - alpha && gamma < 2.0) {
        return Err(Error::Constraint(format!("polynomial regime needs 2 - alpha < gamma < 2, got gamma = {gamma}, alpha = {alpha}")));
    }
    if !(0.0 <= kl && kl <= kh && kh < alpha.min(1.0)) {
        return Err(Error::Constraint(format!("weights need 0 <= k_light <= k_heavy < min(alpha, 1), got {kl}, {kh}")));
    }
    if !(p > 1.0) {
        return Err(Error::Constraint(format!("p = {p} must exceed 1")));
    }
    let beta = (gamma - 2.0).abs();
    let mut unmet = Vec::new();
    if !(beta < kl) {
        unmet.push(format!("|gamma - 2| = {beta} < k_light = {kl}"));
    }
    let p_max = 1.0 + (kl - beta) / (d + alpha - kl);
    if !(p < p_max) {
        unmet.push(format!("p = {p} < 1 + (k - |beta|)/(d + alpha - k) = {p_max}"));
    }
    if kl > alpha + beta && !(p < alpha / kl) {
        unmet.push(format!("p = {p} < alpha / k = {}", alpha / kl));
    }
    let st = Stepper::new(&setup.grid, &setup.cfg, &setup.scheme)?;
    let big_f = scheme_fixed_point(&st, &setup.cfg)?.f;
    // finite in L^p(<x>^{k_heavy}) on the whole space, heavier tail than F
    let a = d / p + kh + 0.1;
    let f0 = setup.grid.sample(|x| crate::grid::bracket(x).powf(-a)).normalized();
    let (t0, t1) = setup.window;
    let times = log_times(t0, t1, setup.samples);
    let series = distance_series(&st, &f0, &big_f, p, kl, &times)?;
    let predicted = predicted_polynomial_exponent(gamma, kh, kl);
    let pad = 0.5 * st.dt + 1e-9;
    let report = decay_fit(&series, Model::Polynomial, (t0 - pad, t1 + pad), Some(predicted), setup.tol)?.named("polynomial-rate");
    Ok(PolynomialOutcome { report, series, unmet })
}
