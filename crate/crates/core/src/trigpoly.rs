//! Sparse trigonometric polynomials and the uniform circle grid.
//!
//! A [`TrigPoly`] stores `sum_n c_n e^{int}` as a frequency-sorted list of
//! nonzero coefficients. Grid samples live in [`GridFunction`], set
//! membership in [`GridMask`].

use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;

/// Coefficients below this magnitude are dropped after every operation.
pub const PRUNE: f64 = 1e-15;
pub const DEFAULT_GRID_CAP: usize = 1 << 22;

/// Grid cap, overridable through `PSF_GRID_CAP`.
pub fn grid_cap() -> usize {
    std::env::var("PSF_GRID_CAP")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|v| v.is_power_of_two() && *v >= 8)
        .unwrap_or(DEFAULT_GRID_CAP)
}

/// Smallest power of two `>= max(8, 8 * degree)`, subject to the cap.
pub fn grid_size(degree: u64) -> Result<usize> {
    let needed = (8 * degree).max(8);
    let g = needed.next_power_of_two();
    let cap = grid_cap();
    if g > cap as u64 {
        return Err(Error::GridCap { needed: g, cap });
    }
    Ok(g as usize)
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrigPoly {
    terms: Vec<(i64, C64)>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(0, C64::new(c, 0.0))])
    }

    pub fn monomial(n: i64, c: C64) -> Self {
        Self::from_terms([(n, c)])
    }

    /// `cos(k t)`.
    pub fn cosine(k: i64) -> Self {
        Self::from_terms([(k, C64::new(0.5, 0.0)), (-k, C64::new(0.5, 0.0))])
    }

    /// Builds from unsorted terms, summing repeated frequencies.
    pub fn from_terms<I: IntoIterator<Item = (i64, C64)>>(it: I) -> Self {
        let mut v: Vec<(i64, C64)> = it.into_iter().collect();
        v.sort_unstable_by_key(|t| t.0);
        Self::from_sorted_dupes(v)
    }

    fn from_sorted_dupes(v: Vec<(i64, C64)>) -> Self {
        let mut out: Vec<(i64, C64)> = Vec::with_capacity(v.len());
        for (n, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == n => last.1 += c,
                _ => out.push((n, c)),
            }
        }
        out.retain(|t| t.1.norm() >= PRUNE);
        Self { terms: out }
    }

    pub fn terms(&self) -> &[(i64, C64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, n: i64) -> C64 {
        match self.terms.binary_search_by_key(&n, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn degree(&self) -> u64 {
        self.terms.iter().map(|t| t.0.unsigned_abs()).max().unwrap_or(0)
    }

    /// Smallest nonzero |frequency|, if any.
    pub fn min_abs_frequency(&self) -> Option<u64> {
        self.terms.iter().filter(|t| t.0 != 0).map(|t| t.0.unsigned_abs()).min()
    }

    /// `coeff(-n) = conj(coeff(n))` to `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.iter().all(|&(n, c)| (self.coeff(-n) - c.conj()).norm() <= tol)
    }

    /// The polynomial without its constant term.
    pub fn without_constant(&self) -> Self {
        Self { terms: self.terms.iter().copied().filter(|t| t.0 != 0).collect() }
    }

    pub fn map_coeffs<F: FnMut(i64, C64) -> C64>(&self, mut f: F) -> Self {
        let v = self.terms.iter().map(|&(n, c)| (n, f(n, c))).collect::<Vec<_>>();
        Self::from_sorted_dupes(v)
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_coeffs(|_, c| c * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map_coeffs(|_, c| c * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
        out.retain(|t| t.1.norm() >= PRUNE);
        Self { terms: out }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale_re(-1.0))
    }

    /// Coefficient `n` moves to `m * n`.
    pub fn dilate(&self, m: u64) -> Self {
        assert!(m >= 1, "dilation factor must be positive");
        let m = i64::try_from(m).expect("dilation factor overflows i64");
        let terms = self
            .terms
            .iter()
            .map(|&(n, c)| (n.checked_mul(m).expect("frequency overflow in dilate"), c))
            .collect();
        Self { terms }
    }

    /// Sum of `|c|^2`.
    pub fn energy(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm_sqr()).sum()
    }

    /// Product, by direct convolution or FFT depending on estimated cost.
    pub fn multiply(&self, other: &Self) -> Self {
        if self.is_empty() || other.is_empty() {
            return Self::zero();
        }
        let direct = (self.len() as f64) * (other.len() as f64);
        let span = (self.terms.last().unwrap().0 - self.terms[0].0)
            + (other.terms.last().unwrap().0 - other.terms[0].0)
            + 1;
        let p = (span as u64).next_power_of_two();
        let fft_cost = 3.0 * p as f64 * (p as f64).log2().max(1.0) * 2.0;
        if direct <= fft_cost || p > (1u64 << 26) {
            self.multiply_direct(other)
        } else {
            self.multiply_fft(other, p as usize)
        }
    }

    pub fn multiply_direct(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.len() * other.len());
        for &(n, a) in &self.terms {
            for &(m, b) in &other.terms {
                v.push((n.checked_add(m).expect("frequency overflow"), a * b));
            }
        }
        Self::from_terms(v)
    }

    fn multiply_fft(&self, other: &Self, p: usize) -> Self {
        let (amin, bmin) = (self.terms[0].0, other.terms[0].0);
        let mut xa = vec![C64::new(0.0, 0.0); p];
        let mut xb = vec![C64::new(0.0, 0.0); p];
        for &(n, c) in &self.terms {
            xa[(n - amin) as usize] = c;
        }
        for &(n, c) in &other.terms {
            xb[(n - bmin) as usize] = c;
        }
        fft::forward(&mut xa);
        fft::forward(&mut xb);
        for (a, b) in xa.iter_mut().zip(&xb) {
            *a *= b;
        }
        fft::inverse(&mut xa);
        let inv = 1.0 / p as f64;
        // Roundoff floor of the transform; exact zeros come back at this size.
        let floor = 8.0 * f64::EPSILON * (p as f64).log2() * (self.energy() * other.energy()).sqrt();
        let thresh = floor.max(PRUNE);
        let terms = xa
            .into_iter()
            .enumerate()
            .filter_map(|(k, c)| {
                let c = c * inv;
                (c.norm() >= thresh).then_some((k as i64 + amin + bmin, c))
            })
            .collect();
        Self { terms }
    }

    /// Exact values at the nodes `2 pi i / g` for any degree (aliasing folds
    /// frequencies but node values are unaffected).
    pub fn sample(&self, g: usize) -> GridFunction {
        assert!(g.is_power_of_two(), "grid size must be a power of two");
        let mut x = vec![C64::new(0.0, 0.0); g];
        let gi = g as i64;
        for &(n, c) in &self.terms {
            x[n.rem_euclid(gi) as usize] += c;
        }
        fft::inverse(&mut x);
        GridFunction { samples: x }
    }

    /// Samples on a grid that oversamples the degree by at least 8.
    pub fn evaluate_grid(&self, g: usize) -> Result<GridFunction> {
        if !g.is_power_of_two() {
            return Err(Error::GridNotPow2(g));
        }
        let needed = 8 * self.degree();
        if (g as u64) < needed.max(8) {
            return Err(Error::GridTooSmall { grid: g, needed: needed.max(8) });
        }
        Ok(self.sample(g))
    }

    /// Max |value| on the grid of `grid_size(degree)`.
    pub fn sup_norm(&self) -> Result<f64> {
        let g = grid_size(self.degree())?;
        Ok(self.sample(g).max_abs())
    }

    /// Text dump: header then `n re im` in ascending n.
    pub fn to_dump(&self) -> String {
        let mut s = String::from("# trigpoly v1\n");
        for &(n, c) in &self.terms {
            s.push_str(&format!("{} {:.17e} {:.17e}\n", n, c.re, c.im));
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "# trigpoly v1" => {}
            _ => return Err(Error::Parse("missing '# trigpoly v1' header".into())),
        }
        let mut v = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("line {}: expected 'n re im'", i + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let n: i64 = f[0].parse().map_err(|_| bad())?;
            let re: f64 = f[1].parse().map_err(|_| bad())?;
            let im: f64 = f[2].parse().map_err(|_| bad())?;
            v.push((n, C64::new(re, im)));
        }
        Ok(Self::from_terms(v))
    }
}

/// Samples on the grid `t_i = 2 pi i / G`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    samples: Vec<C64>,
}

impl GridFunction {
    pub fn new(samples: Vec<C64>) -> Result<Self> {
        if !samples.len().is_power_of_two() {
            return Err(Error::GridNotPow2(samples.len()));
        }
        Ok(Self { samples })
    }

    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::new(v.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.samples.len() as f64
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn re(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.re).collect()
    }

    pub fn mean(&self) -> C64 {
        self.samples.iter().sum::<C64>() / self.samples.len() as f64
    }

    pub fn mean_sq(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn min_re(&self) -> f64 {
        self.samples.iter().map(|c| c.re).fold(f64::INFINITY, f64::min)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self { samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).collect() }
    }

    pub fn masked(&self, mask: &GridMask) -> Self {
        assert_eq!(self.len(), mask.len());
        let z = C64::new(0.0, 0.0);
        Self {
            samples: self.samples.iter().zip(mask.bits()).map(|(&a, &m)| if m { a } else { z }).collect(),
        }
    }

    /// Trigonometric interpolant; the Nyquist coefficient is split evenly
    /// between `+G/2` and `-G/2` so node values are reproduced exactly.
    pub fn interpolant(&self) -> TrigPoly {
        let g = self.samples.len();
        let mut x = self.samples.clone();
        fft::forward(&mut x);
        let inv = 1.0 / g as f64;
        let half = (g / 2) as i64;
        let mut v = Vec::with_capacity(g + 1);
        for (k, c) in x.into_iter().enumerate() {
            let c = c * inv;
            let k = k as i64;
            if g > 1 && k == half {
                v.push((half, c * 0.5));
                v.push((-half, c * 0.5));
            } else if k > half {
                v.push((k - g as i64, c));
            } else {
                v.push((k, c));
            }
        }
        TrigPoly::from_terms(v)
    }
}

/// Membership of each grid point in a set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMask {
    bits: Vec<bool>,
}

impl GridMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn full(g: usize) -> Self {
        Self { bits: vec![true; g] }
    }

    pub fn empty(g: usize) -> Self {
        Self { bits: vec![false; g] }
    }

    /// Mask of grid points where `pred(t_i, value_i)` holds.
    pub fn from_samples<F: Fn(f64) -> bool>(f: &GridFunction, pred: F) -> Self {
        Self { bits: f.samples().iter().map(|c| pred(c.re)).collect() }
    }

    pub fn from_angles<F: Fn(f64) -> bool>(g: usize, pred: F) -> Self {
        let h = 2.0 * PI / g as f64;
        Self { bits: (0..g).map(|i| pred(i as f64 * h)).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect() }
    }

    pub fn not(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.len() == other.len() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Mask dump: `i 0/1` lines.
    pub fn to_dump(&self) -> String {
        let mut s = String::with_capacity(self.bits.len() * 10);
        for (i, b) in self.bits.iter().enumerate() {
            s.push_str(&format!("{} {}\n", i, u8::from(*b)));
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut bits = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = || Error::Parse(format!("mask line {}: expected 'i 0/1'", i + 1));
            let idx: usize = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let b = match it.next() {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(bad()),
            };
            if idx != bits.len() {
                return Err(bad());
            }
            bits.push(b);
        }
        if !bits.len().is_power_of_two() {
            return Err(Error::GridNotPow2(bits.len()));
        }
        Ok(Self { bits })
    }
}

/// Interpolant of the masked samples and the masked-out L2 energy
/// `((1/G) sum_{out} |a|^2)^{1/2}`.
pub fn restrict(a: &TrigPoly, mask: &GridMask, g: usize) -> Result<(TrigPoly, f64)> {
    if mask.len() != g {
        return Err(Error::Invalid(format!("mask length {} differs from grid {}", mask.len(), g)));
    }
    if !g.is_power_of_two() {
        return Err(Error::GridNotPow2(g));
    }
    let s = a.sample(g);
    let out: f64 = s
        .samples()
        .iter()
        .zip(mask.bits())
        .filter(|(_, &m)| !m)
        .map(|(c, _)| c.norm_sqr())
        .sum::<f64>()
        / g as f64;
    Ok((s.masked(mask).interpolant(), out.sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MollifierKind {
    Bump,
    Fejer,
}

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Fourier transform of the unit-mass bump supported in `(-w, w)`, at `n`.
fn bump_transform(w: f64, n: f64) -> f64 {
    let pts = 64 + (10.0 * n * w).ceil() as usize;
    let h = 2.0 / pts as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..pts {
        let u = -1.0 + i as f64 * h;
        let b = bump(u);
        num += b * (n * w * u).cos();
        den += b;
    }
    num / den
}

/// Multipliers `m(0..=nmax)` of the mollifier of the given radius. The bump
/// kernel is the self-convolution of a bump of half the radius, so its
/// multipliers are squares and lie in `[0, 1]`.
pub fn mollifier_multipliers(radius: f64, kind: MollifierKind, nmax: u64) -> Vec<f64> {
    match kind {
        MollifierKind::Fejer => {
            let order = ((2.0 * PI / radius).ceil() as u64).saturating_sub(1);
            (0..=nmax).map(|n| (1.0 - n as f64 / (order + 1) as f64).max(0.0)).collect()
        }
        MollifierKind::Bump => {
            let w = radius / 2.0;
            let direct_cost = (nmax as f64) * (64.0 + 5.0 * nmax as f64 * w);
            if direct_cost <= 5e7 {
                return (0..=nmax).map(|n| bump_transform(w, n as f64).powi(2)).collect();
            }
            let need = (2 * (nmax + 1)).max((512.0 * PI / w) as u64);
            let g = need.next_power_of_two().min(1 << 25) as usize;
            let h = 2.0 * PI / g as f64;
            let mut x = vec![C64::new(0.0, 0.0); g];
            let reach = (w / h).floor() as i64;
            let mut tot = 0.0;
            for l in -reach..=reach {
                let v = bump(l as f64 * h / w);
                tot += v;
                x[l.rem_euclid(g as i64) as usize] = C64::new(v, 0.0);
            }
            fft::forward(&mut x);
            (0..=nmax)
                .map(|n| {
                    let b = x[(n as usize) % g].re / tot;
                    b * b
                })
                .collect()
        }
    }
}

/// Convolution with a nonnegative unit-mass kernel supported in
/// `(-radius, radius)` (bump) or a Fejer kernel of matching main lobe.
pub fn mollify(a: &TrigPoly, radius: f64, kind: MollifierKind) -> Result<TrigPoly> {
    if !(radius > 0.0 && radius < PI) {
        return Err(Error::Invalid(format!("mollifier radius {radius} outside (0, pi)")));
    }
    let m = mollifier_multipliers(radius, kind, a.degree());
    Ok(a.map_coeffs(|n, c| c * m[n.unsigned_abs() as usize]))
}

/// Fejer means of order `m`: coefficient `n` scaled by `max(0, 1 - |n|/(m+1))`.
pub fn fejer(a: &TrigPoly, m: u64) -> TrigPoly {
    a.map_coeffs(|n, c| c * (1.0 - n.unsigned_abs() as f64 / (m + 1) as f64).max(0.0))
}

/// Discrete circular convolution of grid samples with the sampled bump
/// kernel; the result is supported within `radius` of the input support,
/// node for node. Returns the samples and the kernel half-width in nodes.
pub fn mollify_grid(f: &GridFunction, radius: f64) -> (GridFunction, usize) {
    let g = f.len();
    let h = 2.0 * PI / g as f64;
    let w = radius / 2.0;
    let reach = ((w / h).ceil() as usize).saturating_sub(1);
    if reach == 0 {
        return (f.clone(), 0);
    }
    let mut b = vec![C64::new(0.0, 0.0); g];
    let mut tot = 0.0;
    for l in -(reach as i64)..=(reach as i64) {
        let v = bump(l as f64 * h / w);
        tot += v;
        b[l.rem_euclid(g as i64) as usize] = C64::new(v, 0.0);
    }
    fft::forward(&mut b);
    let mut x = f.samples().to_vec();
    fft::forward(&mut x);
    for (xv, bv) in x.iter_mut().zip(&b) {
        let m = bv.re / tot;
        *xv *= m * m;
    }
    fft::inverse(&mut x);
    let inv = 1.0 / g as f64;
    for v in x.iter_mut() {
        *v *= inv;
    }
    (GridFunction { samples: x }, 2 * reach)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn square_of_one_plus_cos() {
        let a = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1));
        let p = a.multiply(&a);
        assert!((p.coeff(0) - c(1.5)).norm() < 1e-15);
        assert!((p.coeff(1) - c(1.0)).norm() < 1e-15);
        assert!((p.coeff(-2) - c(0.25)).norm() < 1e-15);
        assert_eq!(p.len(), 5);
    }

    #[test]
    fn cosine_table_on_eight_points() {
        let a = TrigPoly::cosine(1);
        assert!(matches!(a.evaluate_grid(4), Err(Error::GridTooSmall { .. })));
        let s = a.evaluate_grid(8).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let want = [1.0, r, 0.0, -r, -1.0, -r, 0.0, r];
        for (v, w) in s.samples().iter().zip(want) {
            assert!((v.re - w).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn parseval_one_plus_cos() {
        let a = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1));
        assert!((a.evaluate_grid(8).unwrap().mean_sq() - 1.5).abs() < 1e-14);
        let one = TrigPoly::constant(1.0).evaluate_grid(8).unwrap();
        assert!(one.samples().iter().all(|v| (v - c(1.0)).norm() < 1e-15));
    }

    #[test]
    fn dilate_cosine() {
        assert_eq!(TrigPoly::cosine(1).dilate(3), TrigPoly::cosine(3));
    }

    #[test]
    fn restrict_extremes() {
        let a = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1));
        let (h, e) = restrict(&a, &GridMask::full(64), 64).unwrap();
        assert!(h.sub(&a).terms().iter().all(|t| t.1.norm() < 1e-14));
        assert_eq!(e, 0.0);
        let (h, e) = restrict(&a, &GridMask::empty(64), 64).unwrap();
        assert!(h.is_empty());
        assert!((e - 1.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn restrict_half_circle() {
        // (1/2pi) int_{cos<0} (1+cos)^2 = 3/4 - 2/pi
        let g = 1 << 16;
        let a = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1));
        let mask = GridMask::from_angles(g, |t| t.cos() > 0.0);
        let (_, e) = restrict(&a, &mask, g).unwrap();
        assert!((e * e - (0.75 - 2.0 / PI)).abs() < 1e-4);
    }

    #[test]
    fn fejer_multiplier() {
        let a = TrigPoly::from_terms((-5..=5).map(|n| (n, c(1.0))));
        let f = fejer(&a, 3);
        assert!((f.coeff(2) - c(0.5)).norm() < 1e-15);
        assert_eq!(f.coeff(4), c(0.0));
        assert_eq!(f.coeff(0), c(1.0));
    }

    #[test]
    fn mollify_constant_is_constant() {
        let one = TrigPoly::constant(1.0);
        for r in [0.01, 0.5, 3.0] {
            for k in [MollifierKind::Bump, MollifierKind::Fejer] {
                assert_eq!(mollify(&one, r, k).unwrap(), one);
            }
        }
    }

    #[test]
    fn grid_mollifier_support() {
        let g = 1024;
        let mut v = vec![0.0; g];
        v[500] = 1.0;
        let f = GridFunction::from_real(&v).unwrap();
        let (m, reach) = mollify_grid(&f, 0.05);
        assert!(reach > 0);
        for (i, s) in m.samples().iter().enumerate() {
            if (i as i64 - 500).unsigned_abs() as usize > reach {
                assert!(s.norm() < 1e-12);
            }
        }
        assert!((m.mean().re - 1.0 / g as f64).abs() < 1e-15);
    }

    #[test]
    fn dump_round_trip() {
        let a = TrigPoly::from_terms([(-3, C64::new(0.1, -0.2)), (7, C64::new(1.0 / 3.0, 0.0))]);
        assert_eq!(TrigPoly::from_dump(&a.to_dump()).unwrap(), a);
        let m = GridMask::from_angles(16, |t| t < 1.0);
        assert_eq!(GridMask::from_dump(&m.to_dump()).unwrap(), m);
    }
}
