//! End-to-end acceptance run. Prints one line per criterion and a summary.
//!
//! `ACCEPTANCE=1,5` restricts the run to the listed criteria. The binary exits
//! 0 whatever the verdicts; known misses are expected, see the README.

use std::panic;
use std::time::Instant;

use fracfp::evolution::{duhamel_residual, evolve_with, DiffusionSolver, DuhamelSplit, MonitorSpec, SchemeConfig, Stepper};
use fracfp::functionals::{gp_brackets, ipp_check, nash_chain, poincare_wirtinger_check, relative_entropy, smooth_bank};
use fracfp::operators::{assemble_generator_matrix, one_norm, quadrature_fraclap, spectral_fraclap, weight_action, Generator};
use fracfp::rates::{
    exponential_rate_check, harris_contraction, linear_fit, linf_regularization_slope, lyapunov_check, polynomial_rate_check,
    regularization_slope, subadditivity, tune_lambda, ConvergenceSetup, PolynomialSetup, RegularizationSetup,
};
use fracfp::steady::{leading_eigenpair, scheme_fixed_point, steady_by_linear_solve, steady_with_stepper};
use fracfp::{build_grid, integrate, Exterior, Field, Grid, OperatorConfig, Which};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn l1(a: &Field, b: &Field) -> f64 {
    a.sub(b).values.iter().map(|v| v.abs()).sum::<f64>() * a.grid.cell_volume()
}

fn max_diff(a: &Field, b: &Field) -> f64 {
    a.sub(b).max_abs()
}

fn grid(l: f64, n: usize) -> Grid {
    build_grid(1, l, n).unwrap()
}

fn expm_scheme(dt: f64) -> SchemeConfig {
    SchemeConfig::default().with_diffusion(DiffusionSolver::MatrixExponential).with_dt(dt)
}

fn bump(g: &Grid) -> Field {
    let (s, c) = (0.05 * g.l, 0.05 * g.l);
    g.sample(|x| (-(x[0] - c).powi(2) / (2.0 * s * s)).exp()).normalized()
}

// 1: both steady routes against the Cauchy density
fn closed_form() -> Outcome {
    let start = Instant::now();
    let g = grid(40.0, 2048);
    let cfg = OperatorConfig::new(1.0, 2.0);
    let cauchy = g.sample(|x| 1.0 / (std::f64::consts::PI * (1.0 + x[0] * x[0])));
    let m = assemble_generator_matrix(&g, &cfg, Which::Forward).unwrap();
    let lin = steady_by_linear_solve(&m, &cfg).unwrap().f;
    let st = Stepper::new(&g, &cfg, &expm_scheme(0.01)).unwrap();
    let evo = steady_with_stepper(&st, &bump(&g), &cfg, 1e-8, 200.0).unwrap().f;
    let (dl, de, dr) = (l1(&lin, &cauchy), l1(&evo, &cauchy), l1(&lin, &evo));
    let secs = start.elapsed().as_secs_f64();
    let pass = dl <= 2e-2 && de <= 2e-2 && dr <= 1e-2 && secs <= 60.0;
    outcome(pass, format!("L1 linear {dl:.3e}, evolution {de:.3e}, between {dr:.3e}, {secs:.1} s"))
}

// 2: spectral against periodic quadrature, with the observed order
fn generator_consistency() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 1.5] {
        let errs: Vec<f64> = [512, 1024]
            .iter()
            .map(|&n| {
                let g = grid(20.0, n);
                let u = g.sample(|x| (-x[0] * x[0]).exp());
                let s = spectral_fraclap(&u, alpha).unwrap();
                let cfg = OperatorConfig::new(alpha, 2.0).with_exterior(Exterior::Periodic);
                max_diff(&s, &quadrature_fraclap(&u, &cfg).unwrap())
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        pass &= errs[1] <= 5e-3 && order >= 1.8;
        parts.push(format!("alpha {alpha}: {:.3e}, order {order:.2}", errs[1]));
    }
    outcome(pass, parts.join("; "))
}

// 3: mass and sign over the admissible (alpha, gamma) pairs
fn conservation_positivity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 1.5] {
        for gamma in [1.5, 2.5] {
            if gamma <= 2.0 - alpha {
                continue;
            }
            let g = grid(20.0, 512);
            let cfg = OperatorConfig::new(alpha, gamma);
            let st = Stepper::new(&g, &cfg, &expm_scheme(0.02)).unwrap();
            let f0 = bump(&g);
            let spec = MonitorSpec { k: 0.25, ..MonitorSpec::default() };
            let tr = evolve_with(&st, &f0, 5.0, &[], &spec).unwrap();
            let drift = tr.mass_drift();
            let low = tr.min_value() / f0.max_abs();
            pass &= drift <= 1e-8 && low >= -1e-12;
            parts.push(format!("({alpha}, {gamma}) mass {drift:.1e} min {low:.1e}"));
        }
    }
    outcome(pass, parts.join("; "))
}

// 4: decay exponent of I(<x>^k)
fn weight_exponents() -> Outcome {
    let g = grid(200.0, 4096);
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, alpha) in [(0.3, 0.5), (0.5, 1.0), (0.5, 1.5)] {
        let im = weight_action(&g, k, alpha).unwrap();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for i in 0..g.n {
            let x = g.coord(i);
            if x > 12.5 && x < 50.0 {
                xs.push((1.0 + x * x).sqrt().ln());
                ys.push(im.values[i].abs().ln());
            }
        }
        let slope = linear_fit(&xs, &ys).slope;
        let ok = (slope - (k - alpha)).abs() <= 0.1;
        pass &= ok;
        parts.push(format!("({k}, {alpha}) slope {slope:.3} vs {:.2}{}", k - alpha, if ok { "" } else { " MISS" }));
    }
    outcome(pass, parts.join("; "))
}

// 5: small-time smoothing slopes from a near-delta
fn regularization() -> Outcome {
    let g = grid(20.0, 4096);
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [1.0, 1.5] {
        let setup = RegularizationSetup {
            grid: g,
            cfg: OperatorConfig::new(alpha, 2.0),
            scheme: SchemeConfig::default().with_dt(1e-3),
            k: 0.5,
            window: (0.02, 0.3),
            samples: 16,
            tol: 0.1,
        };
        let l2 = regularization_slope(2.0, &setup).unwrap();
        let linf = linf_regularization_slope(&RegularizationSetup { tol: 0.2, ..setup }).unwrap();
        pass &= l2.verdict.passed() && linf.verdict.passed();
        parts.push(format!(
            "alpha {alpha}: L2 {:.3} vs {:.3}, Linf {:.3} vs {:.3}",
            l2.fitted,
            l2.predicted.unwrap(),
            linf.fitted,
            linf.predicted.unwrap()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn exponential_setup(alpha: f64, gamma: f64, n: usize) -> ConvergenceSetup {
    ConvergenceSetup {
        grid: grid(20.0, n),
        cfg: OperatorConfig::new(alpha, gamma),
        scheme: expm_scheme(0.02),
        p: 1.0,
        k: 0.5,
        window: (1.0, 8.0),
        samples: 40,
        tol: 1e-3,
    }
}

// 6: exponential rate and its stability under refinement
fn exponential_rates() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, gamma) in [(1.0, 2.0), (1.5, 2.5)] {
        let r: Vec<_> = [256, 512].iter().map(|&n| exponential_setup(alpha, gamma, n)).map(|s| exponential_rate_check(&s).unwrap().report).collect();
        let drift = (r[1].fitted - r[0].fitted).abs() / r[0].fitted.abs();
        pass &= r.iter().all(|x| x.fitted > 0.0 && x.r2 > 0.99) && drift <= 0.1;
        parts.push(format!(
            "({alpha}, {gamma}) a {:.4}/{:.4}, r2 {:.5}/{:.5}, change {:.1}%",
            r[0].fitted,
            r[1].fitted,
            r[0].r2,
            r[1].r2,
            100.0 * drift
        ));
    }
    outcome(pass, parts.join("; "))
}

// 7: envelope <t>^{-0.9} in the weak-confinement regime
fn polynomial_envelope() -> Outcome {
    let setup = PolynomialSetup {
        grid: grid(100.0, 1024),
        cfg: OperatorConfig::new(1.5, 1.5),
        scheme: expm_scheme(0.1),
        k_heavy: 0.9,
        k_light: 0.45,
        p: 1.1,
        window: (5.0, 200.0),
        samples: 40,
        tol: 1e-3,
    };
    let out = polynomial_rate_check(&setup).unwrap();
    let r = &out.report;
    let first = out.series.first().map_or(f64::NAN, |s| s.1);
    let last = out.series.last().map_or(f64::NAN, |s| s.1);
    outcome(
        r.verdict.passed(),
        format!("envelope exponent {:.2}, C {:.3e}, distance {first:.3e} -> {last:.3e}, fitted {:.3}", r.predicted.unwrap(), r.prefactor, r.fitted),
    )
}

// 8: entropy along the criterion-6 runs
fn entropy() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, gamma) in [(1.0, 2.0), (1.5, 2.5)] {
        for n in [256, 512] {
            let s = exponential_setup(alpha, gamma, n);
            let st = Stepper::new(&s.grid, &s.cfg, &s.scheme).unwrap();
            let big_f = scheme_fixed_point(&st, &s.cfg).unwrap().f;
            let x0 = 0.15 * s.grid.l;
            let sd = 0.1 * s.grid.l;
            let f0 = s.grid.sample(|x| (-(x[0] - x0).powi(2) / (2.0 * sd * sd)).exp()).normalized();
            let times: Vec<f64> = (1..=16).map(|i| 0.5 * i as f64).collect();
            let spec = MonitorSpec { k: s.k, reference: Some(big_f.clone()), entropy_p: 2.0, every: 1 };
            let tr = evolve_with(&st, &f0, s.window.1, &times, &spec).unwrap();
            let ent: Vec<f64> = tr.monitors.iter().filter_map(|m| m.entropy).collect();
            let rise = ent.windows(2).map(|w| (w[1] - w[0]) / ent[0]).fold(f64::NEG_INFINITY, f64::max);
            let worst = tr.snapshots.iter().map(|f| relative_entropy(f, &big_f, 2.0, &s.cfg).unwrap().dissipation).fold(f64::NEG_INFINITY, f64::max);
            pass &= rise <= 1e-12 && worst <= 0.0;
            parts.push(format!("({alpha}, {gamma}, n {n}) rise {rise:.1e}, dissipation <= {worst:.1e}"));
        }
    }
    outcome(pass, parts.join("; "))
}

// 9: Lyapunov, contraction, subadditivity on the dense semigroup
fn harris() -> Outcome {
    let g = grid(20.0, 256);
    let k = 0.5;
    let adj = assemble_generator_matrix(&g, &OperatorConfig::new(1.0, 2.0), Which::Adjoint).unwrap();
    let lyap = lyapunov_check(&adj, &[0.5, 1.0, 2.0], k).unwrap();
    let g1 = lyap.envelopes[1].gamma_t;
    let lambda = tune_lambda(&adj, 1.0, k).unwrap();
    let h = harris_contraction(&adj, 1.0, k, lambda, 7).unwrap();
    let sub = subadditivity(&adj, 0.5, 0.5, k, lambda).unwrap();
    let pass = lyap.feasible && g1 < 1.0 && h.gamma_bank < 1.0 && h.gamma_exact < 1.0 && sub.margin >= -0.05;
    outcome(
        pass,
        format!(
            "gamma_1 {g1:.4}, contraction bank {:.4} exact {:.4} (lambda {lambda:.3e}), subadditivity margin {:.3e}",
            h.gamma_bank, h.gamma_exact, sub.margin
        ),
    )
}

// 10: Duhamel, duality, conservation, leading eigenpair
fn structure() -> Outcome {
    let small = grid(10.0, 64);
    let cfg = OperatorConfig::new(1.0, 2.0);
    let duhamel = [DuhamelSplit::Localized { m: 5.0, r: 2.0 }, DuhamelSplit::Far { r: 1.0 }]
        .iter()
        .map(|&s| duhamel_residual(1.0, s, &small, &cfg).unwrap().residual)
        .fold(0.0, f64::max);

    let g = grid(20.0, 256);
    let gen = Generator::new(&g, &cfg).unwrap();
    let bank = smooth_bank(&g, 3, 8);
    let mut duality = 0.0f64;
    for w in bank.windows(2) {
        let (u, v) = (&w[0], &w[1]);
        let lu = Field::new(g, gen.apply(&u.values));
        let lv = Field::new(g, gen.apply_adjoint(&v.values));
        let scale = lu.dot(&lu).sqrt() * v.dot(v).sqrt() + u.dot(u).sqrt() * lv.dot(&lv).sqrt();
        duality = duality.max((lu.dot(v) - u.dot(&lv)).abs() / scale);
    }
    let m = assemble_generator_matrix(&g, &cfg, Which::Forward).unwrap();
    let norm = one_norm(&m.matrix);
    let ones = gen.apply_adjoint(&vec![1.0; g.len()]);
    let kernel = ones.iter().fold(0.0f64, |a, v| a.max(v.abs())) / norm;
    let (eig, eig_ok) = match leading_eigenpair(&m) {
        Ok(e) => {
            let ok = e.lambda.abs() <= 1e-8 * norm && e.gap > 0.0 && e.vector.min() > 0.0;
            (format!("lambda {:.1e}, gap {:.3e}, min vector {:.2e}", e.lambda / norm, e.gap, e.vector.min()), ok)
        }
        Err(e) => (e.to_string(), false),
    };
    let pass = duhamel <= 1e-6 && duality <= 1e-8 && kernel <= 1e-10 && eig_ok;
    outcome(pass, format!("Duhamel {duhamel:.1e}, duality {duality:.1e}, adjoint on 1 {kernel:.1e}, {eig}"))
}

// 11: functional inequalities over the bank
fn inequalities() -> Outcome {
    let g = grid(20.0, 512);
    let (alpha, gamma, k) = (1.0, 2.0, 0.5);
    let zcfg = OperatorConfig::new(alpha, gamma).with_exterior(Exterior::ZeroExtension);
    let bank = smooth_bank(&g, 1, 20);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut bracket_c = f64::NAN;
    for p in [1.5, 2.0] {
        let br = gp_brackets(&bank, p, &zcfg).unwrap();
        let lo = br.iter().map(|b| b.min).fold(f64::INFINITY, f64::min);
        let hi = br.iter().map(|b| b.max).fold(0.0, f64::max);
        pass &= lo >= 0.25 && hi <= 4.0;
        parts.push(format!("p {p} ratios in [{lo:.3}, {hi:.3}]"));
        if p == 1.5 {
            bracket_c = br[2].constant;
        }
    }
    let ipp = bank.windows(2).map(|w| ipp_check(&w[0], &w[1], &zcfg).unwrap().defect).fold(0.0, f64::max);
    pass &= ipp <= 1e-6;
    parts.push(format!("ipp {ipp:.1e}"));

    let cfg = OperatorConfig::new(alpha, gamma);
    let mu = steady_by_linear_solve(&assemble_generator_matrix(&g, &cfg, Which::Forward).unwrap(), &cfg).unwrap().f;
    let mass = integrate(&mu);
    let held = bank
        .iter()
        .filter(|v| {
            let mean = v.dot(&mu) / mass;
            poincare_wirtinger_check(&v.map(|x| x - mean), &mu, 5.0, 2.0, &zcfg, 1e-12).unwrap().holds
        })
        .count();
    pass &= held == bank.len();
    parts.push(format!("PW {held}/{}", bank.len()));

    let nash = nash_chain(&bank, 1.5, k, &zcfg, bracket_c).unwrap();
    pass &= nash.holds && nash.c_gn > 0.0 && nash.big_c.is_finite();
    parts.push(format!("Nash c_GN {:.3e}, C {:.3e}", nash.c_gn, nash.big_c));
    outcome(pass, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("closed-form equilibrium", closed_form),
        ("generator consistency", generator_consistency),
        ("conservation and positivity", conservation_positivity),
        ("weight-action exponents", weight_exponents),
        ("regularization exponents", regularization),
        ("exponential convergence", exponential_rates),
        ("polynomial envelope", polynomial_envelope),
        ("entropy dissipation", entropy),
        ("Harris machinery", harris),
        ("structural identities", structure),
        ("inequality bank", inequalities),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    panic::set_hook(Box::new(|_| {}));
    let total = Instant::now();
    let mut passed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let out = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        passed += usize::from(out.pass);
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:2} {verdict} {name} [{:.1} s]: {}", start.elapsed().as_secs_f64(), out.detail);
    }
    println!("acceptance: {passed}/{ran} criteria passed in {:.0} s", total.elapsed().as_secs_f64());
}
