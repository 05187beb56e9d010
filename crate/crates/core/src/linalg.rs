//! Dense helpers for the small-grid analyses: exponentials, the bordered
//! null-space solve, leading eigenpairs and weighted operator norms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `exp(t m)` by scaling and squaring.
pub fn expm(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (m * t).exp()
}

/// Solve `m x = b`.
pub fn solve(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    m.clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singular("LU factorization has a zero pivot".into()))
}

/// Null vector of `m` normalized by `sum(w_i x_i) = 1`, from the system with
/// row `row` replaced by the constraint.
pub fn bordered_null_vector(m: &DMatrix<f64>, w: &[f64], row: usize) -> Result<Vec<f64>> {
    let mut a = m.clone();
    for (j, &wj) in w.iter().enumerate() {
        a[(row, j)] = wj;
    }
    let mut b = vec![0.0; m.nrows()];
    b[row] = 1.0;
    let x = solve(&a, &b)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular("bordered system".into()));
    }
    Ok(x)
}

/// Eigenvalues sorted by decreasing real part.
pub fn eigenvalues_by_real_part(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = m.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    ev.sort_by(|a, b| b.0.total_cmp(&a.0));
    ev
}

/// Eigenvector for a real eigenvalue `lambda` by shifted inverse iteration.
pub fn inverse_iteration(m: &DMatrix<f64>, lambda: f64, start: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    let shift = lambda + 1e-10 * scale;
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let mut x = DVector::from_column_slice(start);
    for _ in 0..8 {
        let y = lu.solve(&x).ok_or_else(|| Error::Singular("inverse iteration".into()))?;
        let nrm = y.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::Singular("inverse iteration".into()));
        }
        x = y / nrm;
    }
    Ok(x.as_slice().to_vec())
}

fn dual(y: &[f64], p: f64) -> Vec<f64> {
    // unit vector in l^{p'} attaining <dual, y> = ||y||_p
    if p == 1.0 {
        return y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
    }
    let nrm = pnorm(y, p);
    if nrm == 0.0 {
        return vec![0.0; y.len()];
    }
    y.iter().map(|v| v.signum() * (v.abs() / nrm).powf(p - 1.0)).collect()
}

pub fn pnorm(y: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return y.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let top = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    top * y.iter().map(|v| (v.abs() / top).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `||diag(out) a diag(1/inp)||_{p -> p}`: exact for `p = 1`, otherwise
/// the best of several power-method runs, a lower bound in general.
pub fn weighted_operator_norm(a: &DMatrix<f64>, inp: &[f64], out: &[f64], p: f64) -> f64 {
    let n = a.ncols();
    let mut s = a.clone();
    for j in 0..n {
        for i in 0..n {
            s[(i, j)] *= out[i] / inp[j];
        }
    }
    if p == 1.0 {
        return (0..n).map(|j| s.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    }
    if p.is_infinite() {
        return (0..n).map(|i| s.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    }
    let q = p / (p - 1.0);
    let colmax = (0..n)
        .max_by(|&x, &y| s.column(x).norm().total_cmp(&s.column(y).norm()))
        .unwrap_or(0);
    let mut starts = vec![vec![1.0; n]];
    let mut e = vec![0.0; n];
    e[colmax] = 1.0;
    starts.push(e);
    let st = s.transpose();
    let mut best = 0.0f64;
    for x0 in starts {
        let nrm = pnorm(&x0, p);
        let mut x = DVector::from_iterator(n, x0.iter().map(|v| v / nrm));
        let mut est = 0.0f64;
        for _ in 0..100 {
            let y = &s * &x;
            let ny = pnorm(y.as_slice(), p);
            let z = &st * DVector::from_column_slice(&dual(y.as_slice(), p));
            x = DVector::from_column_slice(&dual(z.as_slice(), q));
            if ny <= est * (1.0 + 1e-12) {
                est = est.max(ny);
                break;
            }
            est = ny;
        }
        best = best.max(est);
    }
    best
}
