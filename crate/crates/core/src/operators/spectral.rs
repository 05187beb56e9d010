use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fftn;
use crate::grid::{Field, Grid};

/// Fourier multipliers on the periodic box, as functions of `|2 pi xi|`.
pub struct SpectralMultiplier {
    pub grid: Grid,
    fft: Fftn,
    freq: Vec<f64>,
}

impl SpectralMultiplier {
    pub fn new(grid: &Grid) -> SpectralMultiplier {
        let fft = Fftn::new(grid.d, grid.n);
        let w = 2.0 * std::f64::consts::PI / (2.0 * grid.l);
        let freq = (0..grid.len())
            .map(|k| {
                let (k1, k2) = grid.split(k);
                let a = fft.freq(k1);
                let b = if grid.d == 2 { fft.freq(k2) } else { 0.0 };
                w * (a * a + b * b).sqrt()
            })
            .collect();
        SpectralMultiplier { grid: *grid, fft, freq }
    }

    /// `|2 pi xi|` for every bin, in the FFT ordering.
    pub fn frequencies(&self) -> &[f64] {
        &self.freq
    }

    pub fn apply(&self, u: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let factors: Vec<f64> = self.freq.iter().map(|&f| symbol(f)).collect();
        self.apply_factors(u, &factors)
    }

    /// Multiply bin `k` by `factors[k]` (bins in the order of `frequencies`).
    pub fn apply_factors(&self, u: &[f64], factors: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.run(&mut buf, false);
        for (b, &f) in buf.iter_mut().zip(factors) {
            *b *= f;
        }
        self.fft.run(&mut buf, true);
        let norm = 1.0 / buf.len() as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 2)")))
    }
}

/// Periodic fractional Laplacian, multiplier `-|2 pi xi|^alpha`.
pub fn spectral_fraclap(field: &Field, alpha: f64) -> Result<Field> {
    check_alpha(alpha)?;
    let sm = SpectralMultiplier::new(&field.grid);
    let values = sm.apply(&field.values, |f| if f == 0.0 { 0.0 } else { -f.powf(alpha) });
    Ok(Field::new(field.grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn constants_are_annihilated() {
        let g = build_grid(2, 3.0, 16).unwrap();
        let out = spectral_fraclap(&g.constant(2.5), 1.2).unwrap();
        assert!(out.max_abs() < 1e-13);
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let g = build_grid(1, PI, 64).unwrap();
        let u = g.sample(|x| (2.0 * PI * x[0] / (2.0 * PI)).cos());
        let out = spectral_fraclap(&u, 1.0).unwrap();
        let err = out.add(&u).max_abs();
        assert!(err < 1e-13, "{err}");
        // alpha = 1.5 on a 2-d mode with |xi| = sqrt(2)/(2L)
        let g = build_grid(2, PI, 32).unwrap();
        let u = g.sample(|x| (x[0] + x[1]).cos());
        let out = spectral_fraclap(&u, 1.5).unwrap();
        let lam = 2f64.sqrt().powf(1.5);
        assert!(out.add(&u.scale(lam)).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_alpha() {
        let g = build_grid(1, 1.0, 8).unwrap();
        assert!(spectral_fraclap(&g.zeros(), 2.0).is_err());
        assert!(spectral_fraclap(&g.zeros(), 0.0).is_err());
    }
}
