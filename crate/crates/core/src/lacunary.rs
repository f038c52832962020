//! Distribution of `X = sum_j x(nu^j t)` under `prod_j w(nu^j t) dt/2pi`
//! when `nu^N` is far beyond any grid.
//!
//! With `L u(y) = (1/nu) sum_d u((y + 2 pi d)/nu)` (on coefficients,
//! `u^(m) -> u^(m nu)`) one has `int A(y) C(nu y) = int (L A)(y) C(y)`, so
//! `int prod_j h(nu^j t) dt/2pi` is the mean of `B_N`, where `B_1 = h` and
//! `B_{j+1} = h * L B_j`. Taking `h = w e^{i xi x}` gives the characteristic
//! function exactly up to the resolution of the working grid, which only
//! needs to resolve `h` itself. Interval masses follow by Fourier series
//! inversion on a period exceeding the range of `X`.

use crate::fft;
use crate::norms::a_norm;
use crate::riesz::RieszSpec;
use crate::trigpoly::{TrigPoly, C64};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct LacunaryModel {
    pub nu: u64,
    pub n: usize,
    pub weight: TrigPoly,
    pub x: TrigPoly,
}

/// Real samples of `p` on `m` points.
fn samples(p: &TrigPoly, m: usize) -> Vec<f64> {
    p.sample(m).re()
}

impl LacunaryModel {
    /// Weight `(1 + s u)^power` and the variant's `x` factor.
    pub fn from_spec(spec: &RieszSpec, power: u32) -> Self {
        let f = TrigPoly::constant(1.0).add(&spec.unit_factor().scale_re(spec.s));
        let mut w = TrigPoly::constant(1.0);
        for _ in 0..power {
            w = w.multiply(&f);
        }
        Self { nu: spec.nu, n: spec.n, weight: w, x: spec.x_factor() }
    }

    /// Bound on `sup |X|`.
    pub fn range(&self) -> f64 {
        self.n as f64 * a_norm(&self.x, 1.0)
    }

    fn grid_for(&self, xi: f64) -> usize {
        let z = xi.abs() * a_norm(&self.x, 1.0);
        let bw = self.weight.degree() as f64
            + self.x.degree().max(1) as f64 * (z + 3.0 * z.cbrt() + 30.0);
        ((4.0 * bw).ceil() as usize).next_power_of_two().max(64)
    }

    /// `int prod_j w(nu^j t) e^{i xi X(t)} dt/2pi`.
    pub fn char_fn(&self, xi: f64) -> C64 {
        let m = self.grid_for(xi);
        self.char_fn_on(xi, m, &samples(&self.weight, m), &samples(&self.x, m))
    }

    fn char_fn_on(&self, xi: f64, m: usize, ws: &[f64], xs: &[f64]) -> C64 {
        let h: Vec<C64> = ws.iter().zip(xs).map(|(&w, &x)| C64::from_polar(1.0, xi * x) * w).collect();
        let nu = self.nu as usize;
        let inv = 1.0 / m as f64;
        if nu >= m / 2 {
            // L B is the constant mean(B): the factors decouple exactly.
            let mean: C64 = h.iter().sum::<C64>() * inv;
            return mean.powi(self.n as i32);
        }
        let mut b = h.clone();
        for _ in 1..self.n {
            fft::forward(&mut b);
            let mut lb = vec![C64::new(0.0, 0.0); m];
            let half = (m / 2) as i64;
            let mut k = 0i64;
            while k * (nu as i64) < half {
                lb[k as usize] = b[k as usize * nu] * inv;
                if k > 0 {
                    lb[m - k as usize] = b[m - k as usize * nu] * inv;
                }
                k += 1;
            }
            fft::inverse(&mut lb);
            b = lb.iter().zip(&h).map(|(l, hv)| l * hv).collect();
        }
        b.iter().sum::<C64>() * inv
    }

    /// First and second moments of `X` (unnormalized) by central differences.
    pub fn moments(&self) -> (f64, f64) {
        let e = 1e-4 / self.range().max(1e-300);
        let (p, m, z) = (self.char_fn(e), self.char_fn(-e), self.char_fn(0.0));
        let first = ((p - m) / C64::new(0.0, 2.0 * e)).re;
        let second = -((p + m - z * 2.0) / (e * e)).re;
        (first, second)
    }

    /// Characteristic function on the frequencies `2 pi k / P`, stopped once
    /// it stays below `tol` times the total mass.
    pub fn spectrum(&self, tol: f64) -> Spectrum {
        let period = 4.0 * self.range() + 1.0;
        let w = 2.0 * PI / period;
        let total = self.char_fn(0.0).re;
        let mut phis = vec![C64::new(total, 0.0)];
        let mut quiet = 0;
        let mut k = 1usize;
        let mut cache: (usize, Vec<f64>, Vec<f64>) = (0, Vec::new(), Vec::new());
        while quiet < 32 && k < 400_000 {
            let xi = w * k as f64;
            let m = self.grid_for(xi);
            if cache.0 != m {
                cache = (m, samples(&self.weight, m), samples(&self.x, m));
            }
            let v = self.char_fn_on(xi, m, &cache.1, &cache.2);
            quiet = if v.norm() < tol * total.abs() { quiet + 1 } else { 0 };
            phis.push(v);
            k += 1;
        }
        Spectrum { period, phis }
    }
}

/// Characteristic function samples of a real finite measure supported in
/// `(-P/4, P/4)`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub period: f64,
    pub phis: Vec<C64>,
}

impl Spectrum {
    pub fn total(&self) -> f64 {
        self.phis[0].re
    }

    /// Mass of `[c, d]`.
    pub fn mass(&self, c: f64, d: f64) -> f64 {
        let (c, d) = (c.max(-self.period / 2.0), d.min(self.period / 2.0));
        if d <= c {
            return 0.0;
        }
        let w = 2.0 * PI / self.period;
        let mut s = self.total() * (d - c) / self.period;
        for (k, phi) in self.phis.iter().enumerate().skip(1) {
            let wk = w * k as f64;
            // phi(w_k) int_c^d e^{-i w_k x} dx / P, plus the conjugate term
            let integral = (C64::from_polar(1.0, -wk * d) - C64::from_polar(1.0, -wk * c)) / C64::new(0.0, -wk);
            s += 2.0 * (phi * integral).re / self.period;
        }
        s
    }
}
