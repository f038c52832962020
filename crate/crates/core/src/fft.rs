//! Thin wrappers over rustfft with a shared planner.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex, OnceLock};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static P: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

/// In place `x_k <- sum_j x_j exp(-2 pi i jk/n)`, unnormalized.
pub fn forward(x: &mut [Complex64]) {
    if x.len() > 1 {
        plan(x.len(), false).process(x);
    }
}

/// In place `x_k <- sum_j x_j exp(+2 pi i jk/n)`, unnormalized.
pub fn inverse(x: &mut [Complex64]) {
    if x.len() > 1 {
        plan(x.len(), true).process(x);
    }
}
