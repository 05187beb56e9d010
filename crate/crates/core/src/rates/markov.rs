//! Dissipativity of `B = Lambda - M chi_R`, the Lyapunov condition and the
//! Harris seminorm contraction of the adjoint semigroup, on dense matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{decay_fit, Model, RateReport, Verdict};
use crate::error::{Error, Result};
use crate::evolution::{split_matrices, DuhamelSplit};
use crate::grid::{bracket, Grid};
use crate::linalg::{expm, weighted_operator_norm};
use crate::operators::{GeneratorMatrix, OperatorConfig, Which};

/// Largest grid for the pairwise seminorm sups.
pub const HARRIS_LIMIT: usize = 512;

#[derive(Clone, Debug)]
pub struct BSemigroupReport {
    pub report: RateReport,
    /// `(t, ||exp(tB)||_{L^p(m) -> L^p(m^theta)})`.
    pub norms: Vec<(f64, f64)>,
}

/// Operator norms of `exp(tB)` from `L^p(<x>^k)` to `L^p(<x>^{k theta})` at
/// `t = j dt_sample`, `j = 0..=steps`, and the decay verdict: exponential with
/// `b > 0` for `gamma >= 2`, otherwise a polynomial exponent of at least
/// `k (1 - theta) / |gamma - 2| - tol` (for `theta = 1`: norms bounded by `1 + tol`).
#[allow(clippy::too_many_arguments)]
pub fn b_semigroup_decay(
    grid: &Grid,
    cfg: &OperatorConfig,
    theta: f64,
    p: f64,
    k: f64,
    m_big: f64,
    r: f64,
    dt_sample: f64,
    steps: usize,
    window: (f64, f64),
    tol: f64,
) -> Result<BSemigroupReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Constraint(format!("theta = {theta} outside [0, 1]")));
    }
    if !(p >= 1.0) {
        return Err(Error::Constraint(format!("p = {p} < 1")));
    }
    if !(k > 0.0 && k < cfg.alpha.min(1.0)) {
        return Err(Error::Constraint(format!("k = {k} outside (0, min(alpha, 1))")));
    }
    let (lam, a) = split_matrices(grid, cfg, DuhamelSplit::Localized { m: m_big, r })?;
    let b = &lam - &a;
    let step = expm(&b, dt_sample);
    let inp: Vec<f64> = (0..grid.len()).map(|i| bracket(grid.node(i)).powf(k)).collect();
    let out: Vec<f64> = inp.iter().map(|m| m.powf(theta)).collect();
    let mut e = DMatrix::<f64>::identity(grid.len(), grid.len());
    let mut norms = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        if j > 0 {
            e = &step * &e;
        }
        norms.push((j as f64 * dt_sample, weighted_operator_norm(&e, &inp, &out, p)));
    }
    let beta = cfg.gamma() - 2.0;
    let report = if beta >= 0.0 {
        decay_fit(&norms, Model::Exponential, window, None, tol)?
    } else {
        let predicted = k * (1.0 - theta) / beta.abs();
        let mut rep = decay_fit(&norms, Model::Polynomial, window, Some(predicted), tol)?;
        let ok = if theta == 1.0 {
            norms.iter().all(|(_, w)| *w <= 1.0 + tol)
        } else {
            rep.fitted >= predicted - tol
        };
        rep.verdict = Verdict::from_bool(ok);
        rep
    };
    Ok(BSemigroupReport { report: report.named("b-semigroup"), norms })
}

/// `m_lambda = 1 + lambda <x>^k` on the nodes.
pub fn m_lambda(grid: &Grid, k: f64, lambda: f64) -> Vec<f64> {
    (0..grid.len()).map(|i| 1.0 + lambda * bracket(grid.node(i)).powf(k)).collect()
}

/// `sup_{x != y} |phi(x) - phi(y)| / (m(x) + m(y))`.
pub fn harris_seminorm(phi: &[f64], m: &[f64]) -> f64 {
    (0..phi.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0f64;
            for j in i + 1..phi.len() {
                s = s.max((phi[i] - phi[j]).abs() / (m[i] + m[j]));
            }
            s
        })
        .reduce(|| 0.0, f64::max)
}

/// `inf_c ||(phi - c) / m||_inf` and the minimizing shift, by ternary search
/// on the convex function of `c`.
pub fn shifted_sup_norm(phi: &[f64], m: &[f64]) -> (f64, f64) {
    let f = |c: f64| phi.iter().zip(m).map(|(p, w)| (p - c).abs() / w).fold(0.0, f64::max);
    let (mut lo, mut hi) = (
        phi.iter().cloned().fold(f64::INFINITY, f64::min),
        phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let c = 0.5 * (lo + hi);
    (f(c), c)
}

/// Seeded test functions: `+-m_lambda`, the coordinates, and random
/// band-limited fields of growing amplitude.
pub fn harris_bank(grid: &Grid, m: &[f64], seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bank = vec![m.to_vec(), m.iter().map(|v| -v).collect()];
    for c in 0..grid.d {
        bank.push((0..grid.len()).map(|i| grid.node(i)[c]).collect());
    }
    while bank.len() < count {
        let modes: Vec<(f64, f64, f64, f64)> = (1..=6)
            .map(|j| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                    j as f64 * std::f64::consts::PI / grid.l,
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let grow = rng.gen_range(0.0..1.0);
        bank.push(
            (0..grid.len())
                .map(|i| {
                    let x = grid.node(i);
                    let wave: f64 = modes.iter().map(|(a, ph, w, s)| a * (w * (x[0] + s * x[1]) + ph).cos()).sum();
                    wave * (1.0 + grow * (m[i] - 1.0))
                })
                .collect(),
        );
    }
    bank.truncate(count);
    bank
}

#[derive(Clone, Debug)]
pub struct HarrisReport {
    pub t: f64,
    pub lambda: f64,
    /// Sup of the seminorm ratio over the test bank (a lower bound).
    pub gamma_bank: f64,
    /// The operator seminorm from the dual formula
    /// `sup_{x,y} sum_z m(z) |P(x,z) - P(y,z)| / (m(x) + m(y))`.
    pub gamma_exact: f64,
}

fn check_adjoint(adj: &GeneratorMatrix) -> Result<()> {
    if adj.which != Which::Adjoint {
        return Err(Error::InvalidParameter("Harris checks act on the adjoint matrix".into()));
    }
    if adj.grid.len() > HARRIS_LIMIT {
        return Err(Error::Oversized { size: adj.grid.len(), limit: HARRIS_LIMIT });
    }
    Ok(())
}

fn dual_contraction(pt: &DMatrix<f64>, m: &[f64]) -> f64 {
    let n = pt.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| pt.row(i).iter().copied().collect()).collect();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut s = 0.0f64;
            for y in x + 1..n {
                let tv: f64 = (0..n).map(|z| m[z] * (rows[x][z] - rows[y][z]).abs()).sum();
                s = s.max(tv / (m[x] + m[y]));
            }
            s
        })
        .reduce(|| 0.0, f64::max)
}

fn contraction_of(pt: &DMatrix<f64>, grid: &Grid, k: f64, lambda: f64, t: f64, seed: u64) -> HarrisReport {
    let m = m_lambda(grid, k, lambda);
    let bank = harris_bank(grid, &m, seed, 50);
    let mut gamma_bank = 0.0f64;
    for phi in &bank {
        let den = harris_seminorm(phi, &m);
        if den > 0.0 {
            let out = pt * DVector::from_column_slice(phi);
            gamma_bank = gamma_bank.max(harris_seminorm(out.as_slice(), &m) / den);
        }
    }
    HarrisReport { t, lambda, gamma_bank, gamma_exact: dual_contraction(pt, &m) }
}

/// Contraction factor of `P_t = exp(t Lambda*)` in the `m_lambda` seminorm.
pub fn harris_contraction(adj: &GeneratorMatrix, t: f64, k: f64, lambda: f64, seed: u64) -> Result<HarrisReport> {
    check_adjoint(adj)?;
    let pt = expm(&adj.matrix, t);
    Ok(contraction_of(&pt, &adj.grid, k, lambda, t, seed))
}

/// `lambda` on a log grid over `[1e-3, 1e3]` minimizing the exact contraction at time `t`.
pub fn tune_lambda(adj: &GeneratorMatrix, t: f64, k: f64) -> Result<f64> {
    check_adjoint(adj)?;
    let pt = expm(&adj.matrix, t);
    let mut best = (f64::INFINITY, 1.0);
    for j in 0..=24 {
        let lambda = 10f64.powf(-3.0 + 0.25 * j as f64);
        let g = dual_contraction(&pt, &m_lambda(&adj.grid, k, lambda));
        if g < best.0 {
            best = (g, lambda);
        }
    }
    Ok(best.1)
}

#[derive(Clone, Copy, Debug)]
pub struct Subadditivity {
    pub a_t: f64,
    pub a_s: f64,
    pub a_ts: f64,
    /// `a_{t+s} - a_t - a_s`.
    pub margin: f64,
}

/// `a_t = -ln gamma_t` from the exact contraction factor at `t`, `s`, `t + s`.
pub fn subadditivity(adj: &GeneratorMatrix, t: f64, s: f64, k: f64, lambda: f64) -> Result<Subadditivity> {
    check_adjoint(adj)?;
    let m = m_lambda(&adj.grid, k, lambda);
    let a = |tt: f64| -dual_contraction(&expm(&adj.matrix, tt), &m).ln();
    let (a_t, a_s, a_ts) = (a(t), a(s), a(t + s));
    Ok(Subadditivity { a_t, a_s, a_ts, margin: a_ts - a_t - a_s })
}

#[derive(Clone, Copy, Debug)]
pub struct LyapunovEnvelope {
    pub t: f64,
    /// `e^{-a t}`.
    pub gamma_t: f64,
    /// Smallest `c` with `P_t m <= gamma_t m + c` on the nodes.
    pub c: f64,
    /// `b/a (1 - e^{-at})`, the constant the generator bound implies.
    pub c_implied: f64,
}

#[derive(Clone, Debug)]
pub struct LyapunovReport {
    /// Confinement rate: `min -(Lambda* m)/m` over `|x| >= L/4`.
    pub a: f64,
    /// `max (Lambda* m + a m)`, so that `Lambda* m <= b - a m` on every node.
    pub b: f64,
    /// `(Lambda* m)(x)` at the node nearest the origin.
    pub at_origin: f64,
    pub envelopes: Vec<LyapunovEnvelope>,
    /// `a > 0` and every envelope is consistent with the generator bound.
    pub feasible: bool,
}

pub fn lyapunov_check(adj: &GeneratorMatrix, t_samples: &[f64], k: f64) -> Result<LyapunovReport> {
    if adj.which != Which::Adjoint {
        return Err(Error::InvalidParameter("the Lyapunov check acts on the adjoint matrix".into()));
    }
    let g = &adj.grid;
    let m: Vec<f64> = (0..g.len()).map(|i| bracket(g.node(i)).powf(k)).collect();
    let lm = adj.apply(&m);
    let a = (0..g.len())
        .filter(|&i| g.radius(i) >= 0.25 * g.l)
        .map(|i| -lm[i] / m[i])
        .fold(f64::INFINITY, f64::min);
    let b = (0..g.len()).map(|i| lm[i] + a * m[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut envelopes = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let pm = if t == 0.0 { m.clone() } else { (expm(&adj.matrix, t) * DVector::from_column_slice(&m)).as_slice().to_vec() };
        let gamma_t = (-a * t).exp();
        let c = pm.iter().zip(&m).map(|(p, w)| p - gamma_t * w).fold(0.0, f64::max);
        let c_implied = if a > 0.0 { b / a * (1.0 - gamma_t) } else { f64::INFINITY };
        envelopes.push(LyapunovEnvelope { t, gamma_t, c, c_implied });
    }
    let feasible = a > 0.0 && envelopes.iter().all(|e| e.c <= e.c_implied * (1.0 + 1e-8) + 1e-12);
    Ok(LyapunovReport { a, b, at_origin: lm[g.centre_index()], envelopes, feasible })
}
