//! Seeded bank of smooth, boundary-decaying test fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, Grid, Point};

/// `count` smooth fields on `grid`, cycling through Gaussians, compact
/// bumps, band-limited sign-changing packets and signed Gaussian pairs.
/// All lengths scale with `L`, so every field is below `1e-8` of its peak
/// on the boundary.
pub fn smooth_bank(grid: &Grid, seed: u64, count: usize) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.l;
    let d = grid.d;
    let centre = |rng: &mut ChaCha8Rng| -> Point {
        let c0 = rng.gen_range(-0.2..0.2) * l;
        let c1 = if d == 2 { rng.gen_range(-0.2..0.2) * l } else { 0.0 };
        [c0, c1]
    };
    let r2 = |x: Point, c: Point| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
    (0..count)
        .map(|k| match k % 4 {
            0 => {
                let c = centre(&mut rng);
                let s = rng.gen_range(0.04..0.1) * l;
                let a = rng.gen_range(0.5..2.0);
                grid.sample(|x| a * (-0.5 * r2(x, c) / (s * s)).exp())
            }
            1 => {
                let c = centre(&mut rng);
                let rad = rng.gen_range(0.2..0.4) * l;
                grid.sample(|x| {
                    let t = r2(x, c) / (rad * rad);
                    if t < 1.0 {
                        (1.0 - 1.0 / (1.0 - t)).exp()
                    } else {
                        0.0
                    }
                })
            }
            2 => {
                let c = centre(&mut rng);
                let s = 0.1 * l;
                let modes: Vec<(f64, f64, f64)> = (1..=4)
                    .map(|m| (rng.gen_range(-1.0..1.0) / m as f64, rng.gen_range(0.0..std::f64::consts::TAU), m as f64))
                    .collect();
                let shift = rng.gen_range(-0.5..0.5);
                let wave = 2.0 * std::f64::consts::PI / (0.4 * l);
                grid.sample(|x| {
                    let t = x[0] - c[0] + 0.5 * (x[1] - c[1]);
                    let b: f64 = modes.iter().map(|(a, ph, m)| a * (m * wave * t + ph).cos()).sum();
                    (shift + b) * (-0.5 * r2(x, c) / (s * s)).exp()
                })
            }
            _ => {
                let (c1, c2) = (centre(&mut rng), centre(&mut rng));
                let s1 = rng.gen_range(0.04..0.1) * l;
                let s2 = rng.gen_range(0.04..0.1) * l;
                let w = rng.gen_range(0.3..1.0);
                grid.sample(|x| (-0.5 * r2(x, c1) / (s1 * s1)).exp() - w * (-0.5 * r2(x, c2) / (s2 * s2)).exp())
            }
        })
        .collect::<Vec<Field>>()
}
