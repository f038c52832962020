//! Riesz products `prod_j (1 + s u(nu^j t))`, their mixtures against signed
//! atomic measures, and quadrature of the resulting densities.

use crate::error::{Error, Result};
use crate::kahane::AtomicMeasure;
use crate::lacunary::LacunaryModel;
use crate::norms::a_norm;
use crate::trigpoly::{grid_size, GridMask, TrigPoly, C64};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant {
    C0,
    Lq { q: f64 },
    Generators,
    Orlicz { r: f64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::C0 => "c0",
            Variant::Lq { .. } => "lq",
            Variant::Generators => "generators",
            Variant::Orlicz { .. } => "orlicz",
        }
    }
}

/// Default admissible s-interval for the lq and orlicz variants.
pub const DEFAULT_S_INTERVAL: (f64, f64) = (0.8, 0.9);

#[derive(Clone, Debug, PartialEq)]
pub struct RieszSpec {
    pub variant: Variant,
    /// Real polynomial with zero mean; `cos t` for every variant but generators.
    pub base: TrigPoly,
    pub nu: u64,
    pub n: usize,
    pub s: f64,
}

impl RieszSpec {
    pub fn c0(nu: u64, n: usize, s: f64) -> Self {
        Self { variant: Variant::C0, base: TrigPoly::cosine(1), nu, n, s }
    }

    pub fn lq(q: f64, nu: u64, n: usize, s: f64) -> Self {
        Self { variant: Variant::Lq { q }, base: TrigPoly::cosine(1), nu, n, s }
    }

    pub fn orlicz(r: f64, nu: u64, n: usize, s: f64) -> Self {
        Self { variant: Variant::Orlicz { r }, base: TrigPoly::cosine(1), nu, n, s }
    }

    pub fn generators(base: TrigPoly, nu: u64, n: usize, s: f64) -> Self {
        Self { variant: Variant::Generators, base, nu, n, s }
    }

    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..self.clone() }
    }

    /// The factor `u` with `lambda_s = prod (1 + s u(nu^j t))`.
    pub fn unit_factor(&self) -> TrigPoly {
        let n = self.n as f64;
        match self.variant {
            Variant::C0 => TrigPoly::cosine(1).scale_re(2.0),
            Variant::Lq { q } => TrigPoly::cosine(1).scale_re(2.0 * n.powf(-1.0 / q)),
            Variant::Orlicz { r } => TrigPoly::cosine(1).scale_re(2.0 * r),
            Variant::Generators => self.base.clone(),
        }
    }

    /// Per-factor piece of `X = sum_j x(nu^j t)`.
    pub fn x_factor(&self) -> TrigPoly {
        let n = self.n as f64;
        match self.variant {
            Variant::C0 => TrigPoly::cosine(1).scale_re(2.0 / n),
            Variant::Lq { q } => TrigPoly::cosine(1).scale_re(n.powf(-(q - 1.0) / q)),
            Variant::Orlicz { r } => TrigPoly::cosine(1).scale_re(1.0 / (n * r)),
            Variant::Generators => self.base.scale_re(1.0 / n),
        }
    }

    /// `2s`, `2sN^{-1/q}`, `s` or `2sr`, as appropriate.
    pub fn scale(&self) -> f64 {
        let n = self.n as f64;
        match self.variant {
            Variant::C0 => 2.0 * self.s,
            Variant::Lq { q } => 2.0 * self.s * n.powf(-1.0 / q),
            Variant::Orlicz { r } => 2.0 * self.s * r,
            Variant::Generators => self.s,
        }
    }

    /// Frequency-uniqueness and parameter-range checks, without requiring
    /// the factors to be nonnegative.
    pub fn validate_structure(&self) -> Result<()> {
        let deg = self.base.degree();
        if self.nu < 3 || self.nu <= 2 * deg {
            return Err(Error::Invalid(format!("need nu >= 3 and nu > 2 deg(base); nu = {}, deg = {deg}", self.nu)));
        }
        if self.n == 0 {
            return Err(Error::Invalid("N must be positive".into()));
        }
        match self.variant {
            Variant::Lq { q } if !(q > 2.0) => return Err(Error::Invalid("q must exceed 2".into())),
            Variant::Orlicz { r } if !(r > 0.0 && r < 1.0) => {
                return Err(Error::Invalid("r must lie in (0, 1)".into()))
            }
            Variant::Generators => {
                if !self.base.is_real(1e-12) || self.base.coeff(0).norm() > 1e-12 {
                    return Err(Error::Invalid("generator base must be real with zero mean".into()));
                }
                if self.base.sup_norm()? > 1.0 + 1e-12 {
                    return Err(Error::Invalid("generator base must satisfy |phi| <= 1".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Structure checks plus `0 <= scale < 1`, so every factor is positive.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let sc = self.scale();
        if !(self.s >= 0.0 && sc < 1.0) {
            return Err(Error::Invalid(format!("scale {sc} outside [0, 1) for s = {}", self.s)));
        }
        Ok(())
    }
}

/// Expansion terms `(frequency, weight, grade)` with
/// `lambda_s = sum s^grade * weight * e^{i freq t}`; grade counts the
/// non-constant factors used.
pub fn riesz_graded(spec: &RieszSpec) -> Result<Vec<(i64, C64, u32)>> {
    let u = spec.unit_factor();
    let mut terms: Vec<(i64, C64, u32)> = vec![(0, C64::new(1.0, 0.0), 0)];
    let mut pow: i64 = 1;
    for _ in 0..spec.n {
        pow = pow
            .checked_mul(spec.nu as i64)
            .ok_or_else(|| Error::Invalid("nu^N overflows the frequency range".into()))?;
        let mut next = Vec::with_capacity(terms.len() * (u.len() + 1));
        for &(f, w, g) in &terms {
            next.push((f, w, g));
            for &(k, c) in u.terms() {
                next.push((f + k * pow, w * c, g + 1));
            }
        }
        terms = next;
    }
    terms.sort_unstable_by_key(|t| t.0);
    if let Some(w) = terms.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Collision(w[0].0));
    }
    Ok(terms)
}

/// Builds the product for any `s >= 0`; the result is a density only when
/// `spec.scale() < 1`.
pub fn build_riesz(spec: &RieszSpec) -> Result<TrigPoly> {
    spec.validate_structure()?;
    if !(spec.s >= 0.0) {
        return Err(Error::Invalid("s must be nonnegative".into()));
    }
    let terms = riesz_graded(spec)?;
    Ok(TrigPoly::from_terms(terms.into_iter().map(|(f, w, g)| (f, w * spec.s.powi(g as i32)))))
}

/// `sum_j x(nu^j t)`.
pub fn build_x(spec: &RieszSpec) -> TrigPoly {
    let x = spec.x_factor();
    let mut out = TrigPoly::zero();
    let mut pow = 1u64;
    for _ in 0..spec.n {
        pow *= spec.nu;
        out = out.add(&x.dilate(pow));
    }
    out
}

/// `int lambda_s d rho(s)`, computed by replacing `s^k` with the k-th moment.
pub fn mix(rho: &AtomicMeasure, spec: &RieszSpec) -> Result<TrigPoly> {
    for &(s, _) in rho.atoms() {
        if !(s >= 0.0) {
            return Err(Error::AtomOutOfRange(s));
        }
    }
    spec.validate_structure()?;
    let terms = riesz_graded(spec)?;
    let moments: Vec<f64> = (0..=spec.n).map(|k| if k == 0 { 1.0 } else { rho.moment(k) }).collect();
    Ok(TrigPoly::from_terms(terms.into_iter().map(|(f, w, g)| (f, w * moments[g as usize]))))
}

/// Grid minimum and mean of a real density.
pub fn density_stats(lambda: &TrigPoly, g: usize) -> Result<(f64, f64)> {
    let s = lambda.evaluate_grid(g)?;
    Ok((s.min_re(), s.mean().re))
}

/// `(1/G) sum_{masked} lambda(t_i)`.
pub fn measure_of_set(lambda: &TrigPoly, mask: &GridMask, g: usize) -> Result<f64> {
    if mask.len() != g {
        return Err(Error::Invalid("mask length differs from grid".into()));
    }
    let s = lambda.evaluate_grid(g)?;
    let min = s.min_re();
    let mean = s.mean().re;
    if min < -1e-9 || (mean - 1.0).abs() > 1e-9 {
        return Err(Error::NotDensity(format!("grid min {min:e}, mean {mean}")));
    }
    let tot: f64 = s.samples().iter().zip(mask.bits()).filter(|(_, &m)| m).map(|(c, _)| c.re).sum();
    Ok(tot / g as f64)
}

/// `(1/G) sum_{outside mask} lambda(t_i)^2`.
pub fn l2_restriction(lambda: &TrigPoly, mask: &GridMask, g: usize) -> Result<f64> {
    if mask.len() != g {
        return Err(Error::Invalid("mask length differs from grid".into()));
    }
    let s = lambda.evaluate_grid(g)?;
    if s.min_re() < -1e-9 {
        return Err(Error::NotDensity(format!("grid min {:e}", s.min_re())));
    }
    let tot: f64 = s.samples().iter().zip(mask.bits()).filter(|(_, &m)| !m).map(|(c, _)| c.re * c.re).sum();
    Ok(tot / g as f64)
}

/// Restriction bound `2^11 phi(r) / r^2`.
pub fn orlicz_restriction_bound(phi_r: f64, r: f64) -> f64 {
    2048.0 * phi_r / (r * r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundRule {
    /// `3 exp(-alpha^2 N^{2/p-1} / 8)`.
    Lq { q: f64, n: usize },
    /// `2 exp(-alpha^2 / (8 M^2 N))`.
    Hoeffding { m: f64, n: usize },
    /// `3 exp(-alpha^2 N / 8)`.
    Generators { n: usize },
    /// `3 exp(-alpha^2 N r^2 / 8)`.
    Orlicz { n: usize, r: f64 },
    /// `var / alpha^2`.
    Chebyshev { var: f64 },
}

impl BoundRule {
    pub fn bound(&self, alpha: f64) -> f64 {
        let a2 = alpha * alpha;
        match *self {
            BoundRule::Lq { q, n } => {
                let p = q / (q - 1.0);
                3.0 * (-a2 * (n as f64).powf(2.0 / p - 1.0) / 8.0).exp()
            }
            BoundRule::Hoeffding { m, n } => 2.0 * (-a2 / (8.0 * m * m * n as f64)).exp(),
            BoundRule::Generators { n } => 3.0 * (-a2 * n as f64 / 8.0).exp(),
            BoundRule::Orlicz { n, r } => 3.0 * (-a2 * n as f64 * r * r / 8.0).exp(),
            BoundRule::Chebyshev { var } => var / a2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailRow {
    pub alpha: f64,
    pub empirical: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub expectation: f64,
    pub variance: f64,
    pub rows: Vec<TailRow>,
    /// "grid" or "lacunary".
    pub method: &'static str,
    /// Set when some factor `1 + s u` changes sign, so the weight is a
    /// signed measure and tails need not lie in [0, 1].
    pub signed_density: bool,
}

impl ConcentrationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// `sum_n a(n) b(-n)`.
pub fn pairing(a: &TrigPoly, b: &TrigPoly) -> C64 {
    a.terms().iter().map(|&(n, c)| c * b.coeff(-n)).sum()
}

/// Tails `lambda_s{|X - center| > alpha}` by grid quadrature; boundary points
/// within 1e-12 of a threshold count as inside.
pub fn concentration_report(
    lambda: &TrigPoly,
    x: &TrigPoly,
    center: f64,
    alphas: &[f64],
    rule: BoundRule,
) -> Result<ConcentrationReport> {
    let expectation = pairing(x, lambda).re;
    let x2 = x.multiply(x);
    let variance = pairing(&x2, lambda).re - expectation * expectation;
    let g = grid_size(lambda.degree().max(x.degree()))?;
    let xs = x.evaluate_grid(g)?;
    let mut rows = Vec::new();
    for &alpha in alphas {
        let mask = GridMask::from_samples(&xs, |v| (v - center).abs() > alpha + 1e-12);
        let empirical = measure_of_set(lambda, &mask, g)?;
        let bound = rule.bound(alpha);
        rows.push(TailRow { alpha, empirical, bound, pass: empirical <= bound });
    }
    let signed_density = lambda.sample(g).min_re() < -1e-9;
    Ok(ConcentrationReport { expectation, variance, rows, method: "grid", signed_density })
}

/// Same tails for parameters whose degree rules out a grid, from the
/// characteristic function of `X` under `lambda_s`.
pub fn concentration_report_lacunary(
    spec: &RieszSpec,
    center: f64,
    alphas: &[f64],
    rule: BoundRule,
) -> Result<ConcentrationReport> {
    spec.validate_structure()?;
    if !(spec.s >= 0.0) {
        return Err(Error::Invalid("s must be nonnegative".into()));
    }
    let signed_density = spec.scale() > 1.0;
    let model = LacunaryModel::from_spec(spec, 1);
    let sp = model.spectrum(1e-13);
    let (expectation, second) = model.moments();
    let total = sp.total();
    let mut rows = Vec::new();
    for &alpha in alphas {
        let inside = sp.mass(center - alpha, center + alpha);
        let empirical = total - inside;
        let bound = rule.bound(alpha);
        rows.push(TailRow { alpha, empirical, bound, pass: empirical <= bound });
    }
    Ok(ConcentrationReport {
        expectation,
        variance: second - expectation * expectation,
        rows,
        method: "lacunary",
        signed_density,
    })
}

/// `int_{X < lo or X > hi} lambda_s^2` from the characteristic function.
pub fn l2_restriction_lacunary(spec: &RieszSpec, lo: f64, hi: f64) -> Result<f64> {
    spec.validate()?;
    let model = LacunaryModel::from_spec(spec, 2);
    let sp = model.spectrum(1e-13);
    Ok((sp.total() - sp.mass(lo, hi)).max(0.0))
}

/// Lipschitz bound `sum |k| |c_k|` of a polynomial.
pub fn lipschitz(base: &TrigPoly) -> f64 {
    base.terms().iter().map(|&(k, c)| k.unsigned_abs() as f64 * c.norm()).sum()
}

/// `max{exp(2 delta N^{-1/q}) - 1, delta N^{1/q} + delta^2}` with
/// `delta = pi Lip / nu`.
pub fn step_error(nu: u64, n: usize, lip: f64, q: f64) -> f64 {
    let d = PI * lip / nu as f64;
    let nn = n as f64;
    ((2.0 * d * nn.powf(-1.0 / q)).exp() - 1.0).max(d * nn.powf(1.0 / q) + d * d)
}

/// Smallest `nu >= max(3, 2 deg + 1)` whose step-approximation error is at
/// most `tolerance`.
pub fn min_nu(n: usize, base: &TrigPoly, q: f64, tolerance: f64) -> Result<u64> {
    if !(tolerance > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let lip = lipschitz(base);
    let mut nu = 3u64.max(2 * base.degree() + 1);
    // step_error is decreasing in nu; jump close to the answer first
    let est = (PI * lip * (n as f64).powf(1.0 / q) / tolerance).floor() as u64;
    if est > nu + 8 {
        nu = nu.max(est / 2);
        while nu > 3u64.max(2 * base.degree() + 1) && step_error(nu - 1, n, lip, q) <= tolerance {
            nu -= 1;
        }
    }
    while step_error(nu, n, lip, q) > tolerance {
        nu += 1;
    }
    Ok(nu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndependenceReport {
    pub lebesgue_max_discrepancy: f64,
    pub product_max_discrepancy: f64,
    pub pass: bool,
}

/// Checks that mixed moments `E prod_j g(nu^j t)^{a_j}`, `a_j in 0..=3`,
/// factor under Lebesgue measure and under `prod (1 + r_j g(nu^j t))`.
/// `g` holds the values on the intervals `(2 pi (k-1)/nu, 2 pi k/nu)`.
pub fn independence_check(g: &[f64], nu: u64, r: &[f64]) -> Result<IndependenceReport> {
    let n = r.len();
    if g.len() as u64 != nu || nu < 2 {
        return Err(Error::Invalid("g needs one value per nu-interval".into()));
    }
    if g.iter().any(|v| v.abs() > 1.0) || g.iter().sum::<f64>().abs() > 1e-12 * nu as f64 {
        return Err(Error::Invalid("g must satisfy -1 <= g <= 1 and have zero mean".into()));
    }
    if r.iter().any(|v| v.abs() >= 1.0) {
        return Err(Error::Invalid("weights must lie in (-1, 1)".into()));
    }
    let cells = nu.checked_pow(n as u32 + 1).filter(|c| *c <= 1 << 24).ok_or_else(|| {
        Error::Invalid("nu^(N+1) too large for exact cell quadrature".into())
    })?;
    // factor j at cell c (midpoint t = 2 pi (c + 1/2)/cells): nu^j t lands in
    // interval floor(nu^{j+1}(c + 1/2)/cells) mod nu.
    let digit = |c: u64, j: usize| -> usize {
        let scale = cells / nu.pow(j as u32 + 1);
        ((c / scale) % nu) as usize
    };
    let exps: Vec<Vec<u32>> = (0..4u32.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let e = code % 4;
                    code /= 4;
                    e
                })
                .collect()
        })
        .collect();
    let mut worst = [0.0f64; 2];
    for (which, weights) in [vec![0.0; n], r.to_vec()].iter().enumerate() {
        let mut joint = vec![0.0; exps.len()];
        let mut single = vec![[0.0f64; 4]; n];
        for c in 0..cells {
            let vals: Vec<f64> = (0..n).map(|j| g[digit(c, j)]).collect();
            let dens: f64 = vals.iter().zip(weights).map(|(v, w)| 1.0 + w * v).product();
            for (slot, a) in joint.iter_mut().zip(&exps) {
                *slot += dens * vals.iter().zip(a).map(|(v, &e)| v.powi(e as i32)).product::<f64>();
            }
            for j in 0..n {
                for (e, s) in single[j].iter_mut().enumerate() {
                    *s += dens * vals[j].powi(e as i32);
                }
            }
        }
        let inv = 1.0 / cells as f64;
        for (slot, a) in joint.iter().zip(&exps) {
            let fact: f64 = a.iter().enumerate().map(|(j, &e)| single[j][e as usize] * inv).product();
            worst[which] = worst[which].max((slot * inv - fact).abs());
        }
    }
    Ok(IndependenceReport {
        lebesgue_max_discrepancy: worst[0],
        product_max_discrepancy: worst[1],
        pass: worst[0] < 1e-8 && worst[1] < 1e-8,
    })
}

/// `|| X^ ||_p` for the lq companion polynomial.
pub fn x_lp_norm(x: &TrigPoly, p: f64) -> f64 {
    a_norm(x, p)
}
