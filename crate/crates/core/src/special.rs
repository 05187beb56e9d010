//! Special functions used by the lattice quadratures.
//!
//! The Hurwitz zeta function is evaluated by Euler-Maclaurin summation, which
//! stays valid for negative `s` (analytic continuation), so the same routine
//! provides the lattice correction constants like `zeta(alpha - 1)`.

use std::f64::consts::PI;

/// Even Bernoulli numbers B_2, B_4, ..., B_24.
const BERNOULLI: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Partial sum plus the Euler-Maclaurin remainder, without the pole term.
fn em_parts(s: f64, a: f64) -> (f64, f64) {
    let n = (12.0 + s.abs()).ceil() as usize;
    let mut head = 0.0;
    for k in 0..n {
        head += (a + k as f64).powf(-s);
    }
    let x = a + n as f64;
    let mut tail = 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) over (2j)!
    let mut coef = s;
    let mut fact = 2.0;
    let mut xp = x.powf(-s - 1.0);
    let x2 = 1.0 / (x * x);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / fact * coef * xp;
        tail += term;
        if term.abs() < 1e-17 * tail.abs().max(1e-300) {
            break;
        }
        let j2 = 2.0 * (j as f64 + 1.0);
        coef *= (s + j2 - 1.0) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        xp *= x2;
    }
    (head + tail, x)
}

/// Hurwitz zeta `sum_{k>=0} (a+k)^{-s}` for real `s != 1` and `a > 0`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(a > 0.0, "hurwitz_zeta needs a > 0");
    assert!((s - 1.0).abs() > 1e-14, "hurwitz_zeta has a pole at s = 1");
    let (sum, x) = em_parts(s, a);
    sum + x.powf(1.0 - s) / (s - 1.0)
}

/// Riemann zeta for real `s != 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Dirichlet beta `sum_k (-1)^k (2k+1)^{-s}`, any real `s`.
pub fn dirichlet_beta(s: f64) -> f64 {
    let (s1, x1) = em_parts(s, 0.25);
    let (s3, x3) = em_parts(s, 0.75);
    // the two pole terms cancel at s = 1; take the limit explicitly there
    let pole = if (s - 1.0).abs() < 1e-8 {
        (x3.ln() - x1.ln()) * (1.0 - 0.5 * (s - 1.0) * (x1.ln() + x3.ln()))
    } else {
        (x1.powf(1.0 - s) - x3.powf(1.0 - s)) / (s - 1.0)
    };
    4f64.powf(-s) * (s1 - s3 + pole)
}

/// Full-lattice sum `sum_{o in Z^d, o != 0} |o|^{-s}`, analytically continued.
pub fn lattice_zeta(d: usize, s: f64) -> f64 {
    match d {
        1 => 2.0 * zeta(s),
        2 => 4.0 * zeta(0.5 * s) * dirichlet_beta(0.5 * s),
        _ => panic!("lattice_zeta: unsupported dimension {d}"),
    }
}

/// Normalising constant of the jump kernel `c |z|^{-d-alpha}`.
pub fn kernel_constant(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    2f64.powf(alpha) * gamma(0.5 * (df + alpha))
        / (PI.powf(0.5 * df) * gamma(-0.5 * alpha).abs())
}

/// Area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI.powf(0.5 * d as f64) / gamma(0.5 * d as f64),
    }
}

/// Volume of the unit ball in R^d.
pub fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}
