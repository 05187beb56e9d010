//! Thin wrapper for `d`-dimensional complex FFTs on square boxes.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fftn {
    pub d: usize,
    pub p: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fftn {
    pub fn new(d: usize, p: usize) -> Fftn {
        let mut planner = FftPlanner::new();
        Fftn { d, p, fwd: planner.plan_fft_forward(p), inv: planner.plan_fft_inverse(p) }
    }

    /// Unnormalized transform in place; the inverse needs a `1/p^d` factor.
    pub fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process(buf);
        if self.d == 2 {
            transpose(buf, self.p);
            plan.process(buf);
            transpose(buf, self.p);
        }
    }

    /// Signed integer frequency of an FFT bin.
    #[inline]
    pub fn freq(&self, k: usize) -> f64 {
        if k <= self.p / 2 {
            k as f64
        } else {
            k as f64 - self.p as f64
        }
    }
}

fn transpose(buf: &mut [Complex64], p: usize) {
    for i in 0..p {
        for j in i + 1..p {
            buf.swap(i * p + j, j * p + i);
        }
    }
}
