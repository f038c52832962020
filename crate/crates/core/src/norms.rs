//! Coefficient norms, Luxemburg norms of Orlicz functions and related
//! diagnostics.

use crate::error::{Error, Result};
use crate::trigpoly::TrigPoly;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    /// `(sum |c|^r)^{1/r}` over all coefficients.
    A(f64),
    Wiener,
    L2,
    /// Max modulus on a grid of the given size.
    Sup(usize),
}

/// `(sum |x|^r)^{1/r}`, scaled by the largest entry to avoid overflow.
pub fn lr_norm<I: IntoIterator<Item = f64>>(it: I, r: f64) -> f64 {
    let v: Vec<f64> = it.into_iter().map(f64::abs).collect();
    let m = v.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    if r.is_infinite() {
        return m;
    }
    m * v.iter().map(|x| (x / m).powf(r)).sum::<f64>().powf(1.0 / r)
}

pub fn norm(a: &TrigPoly, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::A(r) => {
            if !(r >= 1.0) {
                return Err(Error::Invalid(format!("A_r needs r >= 1, got {r}")));
            }
            Ok(a_norm(a, r))
        }
        NormKind::Wiener => Ok(a_norm(a, 1.0)),
        NormKind::L2 => Ok(a.energy().sqrt()),
        NormKind::Sup(g) => Ok(a.evaluate_grid(g)?.max_abs()),
    }
}

pub fn a_norm(a: &TrigPoly, r: f64) -> f64 {
    lr_norm(a.terms().iter().map(|t| t.1.norm()), r)
}

/// `A_r` norm of the coefficients at nonzero frequencies.
pub fn a_norm_nonzero(a: &TrigPoly, r: f64) -> f64 {
    lr_norm(a.terms().iter().filter(|t| t.0 != 0).map(|t| t.1.norm()), r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub kind: String,
    pub value: f64,
    pub grid: Option<usize>,
    pub iterations: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrliczFamily {
    /// `t^q`.
    Power { q: f64 },
    /// `t^q log^alpha(1/t)` up to its convexity knee, linear beyond.
    PowerLog { q: f64, alpha: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrliczFunction {
    pub family: OrliczFamily,
    /// End of the interval on which the closed form is used.
    pub t0: f64,
    value_t0: f64,
    slope_t0: f64,
}

impl OrliczFunction {
    pub fn power(q: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::Invalid(format!("power Orlicz function needs q >= 1, got {q}")));
        }
        Ok(Self { family: OrliczFamily::Power { q }, t0: f64::INFINITY, value_t0: 0.0, slope_t0: 0.0 })
    }

    pub fn power_log(q: f64, alpha: f64) -> Result<Self> {
        if !(q > 1.0) || !alpha.is_finite() {
            return Err(Error::Invalid(format!("power_log needs q > 1 and finite alpha, got ({q}, {alpha})")));
        }
        // With L = ln(1/t): phi' >= 0 iff L >= alpha/q, and phi'' >= 0 iff
        // q(q-1)L^2 - alpha(2q-1)L + alpha(alpha-1) >= 0.
        let (a, b, c) = (q * (q - 1.0), -alpha * (2.0 * q - 1.0), alpha * (alpha - 1.0));
        let disc = b * b - 4.0 * a * c;
        let lstar = if disc >= 0.0 { (-b + disc.sqrt()) / (2.0 * a) } else { 0.0 };
        let l = (alpha / q).max(lstar).max(1e-12);
        let t0 = (-l).exp();
        let value_t0 = t0.powf(q) * l.powf(alpha);
        let slope_t0 = t0.powf(q - 1.0) * l.powf(alpha - 1.0) * (q * l - alpha);
        Ok(Self { family: OrliczFamily::PowerLog { q, alpha }, t0, value_t0, slope_t0 })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self.family {
            OrliczFamily::Power { q } => t.powf(q),
            OrliczFamily::PowerLog { q, alpha } => {
                if t == 0.0 {
                    0.0
                } else if t <= self.t0 {
                    t.powf(q) * (-t.ln()).powf(alpha)
                } else {
                    self.value_t0 + self.slope_t0 * (t - self.t0)
                }
            }
        }
    }

    /// `u` with `phi(u) = 1`.
    pub fn inverse_at_one(&self) -> f64 {
        if let OrliczFamily::Power { .. } = self.family {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.eval(hi) < 1.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Finite-difference check of `phi(0)=0`, positivity, monotonicity and
    /// convexity on `n` points of `(0, min(t0, tmax)]`.
    pub fn validate(&self, tmax: f64, n: usize) -> Result<()> {
        let hi = self.t0.min(tmax);
        if self.eval(0.0) != 0.0 {
            return Err(Error::DegenerateOrlicz("phi(0) != 0".into()));
        }
        let ts: Vec<f64> = (1..=n).map(|i| hi * i as f64 / n as f64).collect();
        let vs: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        if let Some(t) = ts.iter().zip(&vs).find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::DegenerateOrlicz(format!("phi vanishes at {}", t.0)));
        }
        for w in vs.windows(2) {
            if w[1] < w[0] - 1e-10 {
                return Err(Error::DegenerateOrlicz("phi decreases".into()));
            }
        }
        for w in vs.windows(3) {
            if w[0] - 2.0 * w[1] + w[2] < -1e-10 {
                return Err(Error::DegenerateOrlicz("phi fails the convexity check".into()));
            }
        }
        Ok(())
    }
}

/// `inf{rho > 0 : sum phi(|x_n|/rho) <= 1}` by bisection.
pub fn luxemburg_norm(x: &[f64], phi: &OrliczFunction) -> Result<NormReport> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite entry".into()));
    }
    let report = |value, iterations| NormReport {
        kind: "luxemburg".into(),
        value,
        grid: None,
        iterations: Some(iterations),
    };
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(report(0.0, 0));
    }
    let sum: f64 = x.iter().map(|v| v.abs()).sum();
    let u1 = phi.inverse_at_one();
    let f = |rho: f64| x.iter().map(|v| phi.eval(v.abs() / rho)).sum::<f64>();
    let (mut lo, mut hi) = (max / u1 * (1.0 - 1e-15), sum / u1 * (1.0 + 1e-15));
    let mut it = 0;
    while it < 200 && hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        it += 1;
    }
    Ok(report(0.5 * (lo + hi), it))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrliczReport {
    pub delta2_ratio_sup: f64,
    pub submult_constant_m: f64,
    pub n_of_r: Vec<(f64, u64)>,
    /// The grid supplies sampled evidence only; the hypotheses concern t -> 0.
    pub sampled_evidence: bool,
}

/// The integer `N` with `1/phi(r) <= N < 1/phi(r) + 1`; values within 1e-9
/// (relative) of an integer are taken as that integer.
pub fn n_of_r(phi: &OrliczFunction, r: f64) -> Result<u64> {
    let v = phi.eval(r);
    if !(v > 0.0) {
        return Err(Error::DegenerateOrlicz(format!("phi({r}) = {v}")));
    }
    let x = 1.0 / v;
    let near = x.round();
    if (x - near).abs() <= 1e-9 * x {
        Ok(near as u64)
    } else {
        Ok(x.ceil() as u64)
    }
}

pub fn orlicz_checks(phi: &OrliczFunction, grid: &[f64]) -> Result<OrliczReport> {
    if grid.iter().any(|&t| !(t > 0.0) || t > phi.t0) {
        return Err(Error::Invalid("sample grid must lie in (0, t0]".into()));
    }
    let vals: Vec<f64> = grid.iter().map(|&t| phi.eval(t)).collect();
    if let Some(i) = vals.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateOrlicz(format!("phi vanishes at {}", grid[i])));
    }
    let delta2 = grid.iter().zip(&vals).map(|(&t, &v)| phi.eval(2.0 * t) / v).fold(0.0, f64::max);
    let mut m = 0.0f64;
    for (&s, &ps) in grid.iter().zip(&vals) {
        for (&t, &pt) in grid.iter().zip(&vals) {
            m = m.max(phi.eval(s * t) / (ps * pt));
        }
    }
    let n_of_r = grid.iter().map(|&r| n_of_r(phi, r).map(|n| (r, n))).collect::<Result<Vec<_>>>()?;
    Ok(OrliczReport { delta2_ratio_sup: delta2, submult_constant_m: m, n_of_r, sampled_evidence: true })
}

/// `alpha` with `2^alpha = 1/(g^g (1-g)^(1-g))`: the binary entropy of `g`.
pub fn besicovitch_dimension(g: f64) -> Result<f64> {
    if !(g > 0.0 && g < 0.5) {
        return Err(Error::Invalid(format!("gamma must lie in (0, 1/2), got {g}")));
    }
    Ok(-(g * g.log2() + (1.0 - g) * (1.0 - g).log2()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trigpoly::C64;

    #[test]
    fn cosine_norms() {
        let c = TrigPoly::cosine(1);
        assert!((norm(&c, NormKind::Wiener).unwrap() - 1.0).abs() < 1e-15);
        assert!((norm(&c, NormKind::L2).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((norm(&c, NormKind::Sup(64)).unwrap() - 1.0).abs() < 1e-14);
        assert!(norm(&c, NormKind::A(0.5)).is_err());
    }

    #[test]
    fn luxemburg_l2_case() {
        let phi = OrliczFunction::power(2.0).unwrap();
        let r = luxemburg_norm(&[3.0, 4.0], &phi).unwrap();
        assert!((r.value - 5.0).abs() < 1e-11);
        assert_eq!(luxemburg_norm(&[0.0, 0.0], &phi).unwrap().value, 0.0);
    }

    #[test]
    fn power_log_knee() {
        let phi = OrliczFunction::power_log(3.0, 1.0).unwrap();
        assert!((phi.t0 - (-5.0f64 / 6.0).exp()).abs() < 1e-14);
        phi.validate(2.0, 2000).unwrap();
        // continuity at the knee
        let e = 1e-9;
        assert!((phi.eval(phi.t0 + e) - phi.eval(phi.t0 - e)).abs() < 1e-8);
    }

    #[test]
    fn power_checks() {
        let phi = OrliczFunction::power(3.0).unwrap();
        let grid: Vec<f64> = (1..=50).map(|i| i as f64 / 500.0).collect();
        let r = orlicz_checks(&phi, &grid).unwrap();
        assert!((r.delta2_ratio_sup - 8.0).abs() < 1e-12);
        assert!((r.submult_constant_m - 1.0).abs() < 1e-12);
        assert_eq!(n_of_r(&phi, 0.1).unwrap(), 1000);
    }

    #[test]
    fn dimension_values() {
        assert!((besicovitch_dimension(0.25).unwrap() - 0.811_278_124_459_132_8).abs() < 1e-12);
        assert!(besicovitch_dimension(0.5).is_err());
        assert!(besicovitch_dimension(0.4999999).unwrap() > 0.999_999);
        assert!(besicovitch_dimension(1e-9).unwrap() < 1e-7);
    }

    #[test]
    fn x_lq_coefficient_norm() {
        let (n, nu, q) = (6u32, 5i64, 4.0);
        let p = q / (q - 1.0);
        let mut x = TrigPoly::zero();
        for j in 1..=n {
            x = x.add(&TrigPoly::cosine(nu.pow(j)).scale(C64::new((n as f64).powf(-1.0 / p), 0.0)));
        }
        assert!((a_norm(&x, p) - 2f64.powf(1.0 / p - 1.0)).abs() < 1e-14);
    }
}
