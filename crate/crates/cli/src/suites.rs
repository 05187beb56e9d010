//! The verification suites. Module errors become failing records; errors
//! that mean the scenario itself is unusable abort the run.

use std::time::Instant;

use fracfp::evolution::{evolve_with, MonitorRow, MonitorSpec, Stepper};
use fracfp::functionals::{gp_brackets, ipp_check, nash_chain, poincare_wirtinger_check, relative_entropy, smooth_bank};
use fracfp::grid::bracket;
use fracfp::operators::{assemble_generator_matrix, one_norm, DENSE_LIMIT};
use fracfp::rates::{
    b_semigroup_decay, exponential_rate_check, harris_contraction, lyapunov_check, polynomial_rate_check, regularization_slope,
    subadditivity, tune_lambda, ConvergenceSetup, PolynomialSetup, RegularizationSetup, HARRIS_LIMIT,
};
use fracfp::steady::{closed_form_equilibrium, leading_eigenpair, scheme_fixed_point, steady_by_linear_solve, steady_with_stepper};
use fracfp::{build_grid, integrate, Error, Exterior, Field, Grid, Which};

use crate::config::{ScenarioConfig, Suite};
use crate::report::{Artifacts, Record, RunReport};

/// A failure of the scenario rather than of a check.
#[derive(Debug)]
pub struct Precondition(pub String);

impl std::fmt::Display for Precondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Precondition {}

fn is_precondition(e: &Error) -> bool {
    matches!(e, Error::InvalidGrid(_) | Error::InvalidParameter(_) | Error::Hypothesis(_) | Error::Constraint(_) | Error::Oversized { .. })
}

type Out<T> = Result<T, Precondition>;

/// `Ok(Some)` on success, a failing record for ordinary module errors.
fn attempt<T>(name: &str, records: &mut Vec<Record>, r: fracfp::Result<T>) -> Out<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_precondition(&e) => Err(Precondition(format!("{name}: {e}"))),
        Err(e) => {
            records.push(Record::failed(name, e));
            Ok(None)
        }
    }
}

fn l1(a: &Field, b: &Field) -> f64 {
    a.sub(b).values.iter().map(|v| v.abs()).sum::<f64>() * a.grid.cell_volume()
}

fn initial_datum(grid: &Grid) -> Field {
    let s = 0.05 * grid.l;
    let c = 0.05 * grid.l;
    grid.sample(|x| (-((x[0] - c).powi(2) + x[1] * x[1]) / (2.0 * s * s)).exp()).normalized()
}

fn dense_ok(grid: &Grid) -> bool {
    grid.len() <= DENSE_LIMIT
}

fn in_regime(c: &ScenarioConfig) -> bool {
    c.gamma > 2.0 - c.alpha
}

fn evolve_suite(c: &ScenarioConfig, records: &mut Vec<Record>, art: &mut Artifacts) -> Out<()> {
    let grid = c.grid();
    let cfg = c.operator();
    let Some(st) = attempt("evolve-setup", records, Stepper::new(&grid, &cfg, &c.scheme()))? else { return Ok(()) };
    let reference = if in_regime(c) && dense_ok(&grid) {
        attempt("entropy-reference", records, scheme_fixed_point(&st, &cfg))?.map(|s| s.f)
    } else {
        None
    };
    let f0 = initial_datum(&grid);
    let spec = MonitorSpec { k: c.k, reference: reference.clone(), entropy_p: 2.0, every: 1 };
    let Some(tr) = attempt("evolve", records, evolve_with(&st, &f0, c.horizon, &c.output_times, &spec))? else { return Ok(()) };
    records.push(Record::at_most("mass-conservation", tr.mass_drift(), 1e-8));
    let min_rel = tr.min_value() / f0.max_abs();
    records.push(Record::new("positivity", min_rel, None, Some(-1e-12), min_rel >= -1e-12));
    if let Some(big_f) = &reference {
        let ent: Vec<f64> = tr.monitors.iter().filter_map(|m| m.entropy).collect();
        let scale = ent.first().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
        let rise = ent.windows(2).map(|w| (w[1] - w[0]) / scale).fold(f64::NEG_INFINITY, f64::max);
        records.push(Record::at_most("entropy-monotone", rise, 1e-12).with_note("largest relative increase per step, p = 2"));
        let mut worst = f64::NEG_INFINITY;
        for f in &tr.snapshots {
            let Some(e) = attempt("entropy-dissipation", records, relative_entropy(f, big_f, 2.0, &cfg))? else { return Ok(()) };
            worst = worst.max(e.dissipation);
        }
        records.push(Record::at_most("entropy-dissipation", worst, 0.0).with_note("largest dissipation over the snapshots"));
    }
    // one monitor row per requested time, the nearest completed step
    let mut rows: Vec<MonitorRow> = Vec::new();
    for t in &c.output_times {
        let nearest = tr.monitors.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()));
        if let Some(m) = nearest {
            if rows.last().map_or(true, |l| l.t != m.t) {
                rows.push(*m);
            }
        }
    }
    art.monitors = rows;
    Ok(())
}

fn steady_suite(c: &ScenarioConfig, records: &mut Vec<Record>, art: &mut Artifacts) -> Out<()> {
    let grid = c.grid();
    let cfg = c.operator();
    let m = assemble_generator_matrix(&grid, &cfg, Which::Forward).map_err(|e| Precondition(format!("steady: {e}")))?;
    let norm = one_norm(&m.matrix);
    let lin = attempt("linear-solve", records, steady_by_linear_solve(&m, &cfg))?;
    if let Some(s) = &lin {
        records.push(Record::at_most("linear-solve-residual", s.residual / norm, 1e-10).with_note("relative to the matrix 1-norm"));
        let low = s.f.min() / s.f.max_abs();
        records.push(Record::new("steady-positivity", low, None, Some(-1e-12), low >= -1e-12));
        art.steady.push(("linear_solve".into(), s.f.clone()));
    }
    let Some(st) = attempt("steady-setup", records, Stepper::new(&grid, &cfg, &c.scheme()))? else { return Ok(()) };
    let evo = attempt("evolution", records, steady_with_stepper(&st, &initial_datum(&grid), &cfg, 1e-8, 400.0))?;
    if let Some(e) = &evo {
        art.steady.push(("evolution".into(), e.f.clone()));
        if let Some(s) = &lin {
            records.push(Record::at_most("evolution-vs-linear-L1", l1(&e.f, &s.f), 1e-2));
        }
    }
    if c.gamma == 2.0 {
        if let Some(cf) = attempt("closed-form", records, closed_form_equilibrium(c.alpha, &grid, 2.0))? {
            // conditioned on the box, as the computed states are
            let cf = cf.normalized();
            if let Some(s) = &lin {
                let name = if c.alpha == 1.0 && c.d == 1 { "cauchy-L1-distance" } else { "closed-form-L1-distance" };
                records.push(Record::at_most(name, l1(&s.f, &cf), 2e-2));
            }
            art.steady.push(("closed_form".into(), cf));
        }
    }
    if grid.len() <= 512 {
        // a complex or sign-changing leading pair is a failed check, not a bad scenario
        match leading_eigenpair(&m) {
            Ok(e) => records.push(Record::at_most("leading-eigenvalue", e.lambda.abs() / norm, 1e-8).with_note(format!("gap {:.6e}", e.gap))),
            Err(e) => records.push(Record::failed("leading-eigenvalue", e)),
        }
    }
    Ok(())
}

fn coarse_grid(c: &ScenarioConfig, cap_1d: usize) -> Grid {
    let n = if c.d == 1 { c.n.min(cap_1d) } else { c.n.min(16) };
    build_grid(c.d, c.l, n).expect("coarsened grid")
}

fn rates_suite(c: &ScenarioConfig, records: &mut Vec<Record>, art: &mut Artifacts) -> Out<()> {
    let grid = c.grid();
    let cfg = c.operator();
    let scheme = c.scheme();
    let (t0, t1) = (0.05 * c.horizon, 0.5 * c.horizon);
    if c.gamma >= 2.0 {
        let setup = ConvergenceSetup { grid, cfg: cfg.clone(), scheme, p: c.p, k: c.k, window: (t0, t1), samples: 40, tol: 1e-3 };
        if let Some(out) = attempt("exponential-rate", records, exponential_rate_check(&setup))? {
            let r = &out.report;
            let pass = r.verdict.passed() && r.fitted > 0.0 && r.r2 > 0.99;
            records.push(Record::new("exponential-rate", r.fitted, None, None, pass).with_note(format!("r2 {:.6}", r.r2)));
            art.rates.push(out.report);
        }
    } else {
        let p = if c.p > 1.0 { c.p } else { 1.1 };
        let setup = PolynomialSetup {
            grid,
            cfg: cfg.clone(),
            scheme,
            k_heavy: c.k,
            k_light: c.k_light,
            p,
            window: (0.1 * c.horizon, c.horizon),
            samples: 40,
            tol: 1e-3,
        };
        if let Some(out) = attempt("polynomial-rate", records, polynomial_rate_check(&setup))? {
            let r = &out.report;
            let mut rec = Record::new("polynomial-rate", r.fitted, r.predicted, Some(r.tol), r.verdict.passed());
            if !out.unmet.is_empty() {
                rec = rec.with_note(format!("unmet: {}", out.unmet.join("; ")));
            }
            records.push(rec);
            art.rates.push(out.report);
        }
    }
    if let Some(st) = attempt("regularization-setup", records, Stepper::new(&grid, &cfg, &scheme))? {
        let start = (20.0 * st.dt).max(0.02);
        let setup = RegularizationSetup { grid, cfg: cfg.clone(), scheme, k: c.k, window: (start, 10.0 * start), samples: 16, tol: 0.1 };
        if let Some(r) = attempt("regularization-L2", records, regularization_slope(2.0, &setup))? {
            records.push(Record::new("regularization-L2", r.fitted, r.predicted, Some(r.tol), r.verdict.passed()));
            art.rates.push(r);
        }
    }
    let coarse = coarse_grid(c, 256);
    if coarse.len() <= HARRIS_LIMIT {
        let adj = assemble_generator_matrix(&coarse, &cfg, Which::Adjoint).map_err(|e| Precondition(format!("harris: {e}")))?;
        if let Some(lambda) = attempt("harris-lambda", records, tune_lambda(&adj, 1.0, c.k))? {
            if let Some(h) = attempt("harris-contraction", records, harris_contraction(&adj, 1.0, c.k, lambda, c.seed))? {
                let note = format!("n = {}, lambda = {lambda:.6e}, bank sup {:.6e}", coarse.n, h.gamma_bank);
                records.push(Record::new("harris-contraction", h.gamma_exact, None, Some(1.0), h.gamma_exact < 1.0).with_note(note));
            }
            if let Some(s) = attempt("subadditivity", records, subadditivity(&adj, 0.5, 0.5, c.k, lambda))? {
                records.push(Record::new("subadditivity", s.margin, None, Some(-0.05), s.margin >= -0.05));
            }
        }
        if let Some(l) = attempt("lyapunov-envelope", records, lyapunov_check(&adj, &[0.5, 1.0, 2.0], c.k))? {
            let g1 = l.envelopes[1].gamma_t;
            records.push(Record::new("lyapunov-envelope", g1, None, Some(1.0), l.feasible && g1 < 1.0).with_note(format!("a {:.6e}, b {:.6e}", l.a, l.b)));
        }
    }
    if c.d == 1 {
        let small = coarse_grid(c, 128);
        let p = c.p.max(1.0);
        let r = b_semigroup_decay(&small, &cfg, c.theta, p, c.k, 20.0, 0.15 * c.l, 0.1, 40, (0.5, 4.0), 1e-6);
        if let Some(b) = attempt("b-semigroup", records, r)? {
            let rep = b.report;
            records.push(Record::new("b-semigroup", rep.fitted, rep.predicted, Some(rep.tol), rep.verdict.passed()));
            art.rates.push(rep);
        }
    }
    Ok(())
}

fn inequalities_suite(c: &ScenarioConfig, records: &mut Vec<Record>) -> Out<()> {
    let grid = c.grid();
    let zcfg = c.operator().with_exterior(Exterior::ZeroExtension);
    let bank = smooth_bank(&grid, c.seed, 20);
    let mut gradient_c = None;
    for p in [1.5, 2.0] {
        if let Some(br) = attempt("gp-brackets", records, gp_brackets(&bank, p, &zcfg))? {
            for b in &br {
                let pass = b.min >= 0.25 && b.max <= 4.0;
                records.push(Record::new(&format!("gp-{}-p{p}", b.name), b.max, None, Some(4.0), pass).with_note(format!("min {:.6e}", b.min)));
            }
            if p == 1.5 {
                gradient_c = Some(br[2].constant);
            }
        }
    }
    let mut defect = 0.0f64;
    for w in bank.windows(2) {
        let Some(r) = attempt("ipp-identity", records, ipp_check(&w[0], &w[1], &zcfg))? else { return Ok(()) };
        defect = defect.max(r.defect);
    }
    records.push(Record::at_most("ipp-identity", defect, 1e-6));
    let mu = if in_regime(c) && dense_ok(&grid) {
        let m = assemble_generator_matrix(&grid, &c.operator(), Which::Forward).map_err(|e| Precondition(e.to_string()))?;
        attempt("pw-measure", records, steady_by_linear_solve(&m, &c.operator()))?.map(|s| s.f)
    } else {
        Some(grid.sample(|x| bracket(x).powf(-(c.d as f64 + c.alpha))).normalized())
    };
    if let Some(mu) = mu {
        let mass = integrate(&mu);
        let mut held = 0usize;
        for v in &bank {
            let mean = v.dot(&mu) / mass;
            let v0 = v.map(|x| x - mean);
            if let Some(r) = attempt("poincare-wirtinger", records, poincare_wirtinger_check(&v0, &mu, 0.25 * c.l, 2.0, &zcfg, 1e-12))? {
                held += usize::from(r.holds);
            }
        }
        records.push(Record::new("poincare-wirtinger", held as f64, Some(bank.len() as f64), None, held == bank.len()));
    }
    if let Some(bc) = gradient_c {
        if let Some(r) = attempt("nash-chain", records, nash_chain(&bank, 1.5, c.k, &zcfg, bc))? {
            records.push(Record::new("nash-chain", r.c_gn, None, None, r.holds).with_note(format!("C {:.6e}, theta {:.6e}", r.big_c, r.theta)));
        }
    }
    Ok(())
}

/// Run the selected suites in a fixed order.
pub fn run_scenario(c: &ScenarioConfig) -> Out<RunReport> {
    let mut report = RunReport { echo: c.echo(), records: Vec::new(), timings: Vec::new(), artifacts: Artifacts::default() };
    for suite in [Suite::Evolve, Suite::Steady, Suite::Rates, Suite::Inequalities] {
        if !c.suite.includes(suite) {
            continue;
        }
        let start = Instant::now();
        let (records, art) = (&mut report.records, &mut report.artifacts);
        match suite {
            Suite::Evolve => evolve_suite(c, records, art)?,
            Suite::Steady => steady_suite(c, records, art)?,
            Suite::Rates => rates_suite(c, records, art)?,
            _ => inequalities_suite(c, records)?,
        }
        report.timings.push((suite.name().to_string(), start.elapsed()));
    }
    Ok(report)
}
