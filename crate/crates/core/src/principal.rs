//! Principal blocks: a Riesz mixture restricted to a level set of its
//! companion polynomial `X`, normalized and mollified, with a certificate
//! recomputed from the finished objects alone.

use crate::cert::{digest, Certificate};
use crate::error::{Error, Result};
use crate::kahane::{auto_moment_killer, AtomicMeasure};
use crate::norms::{a_norm, a_norm_nonzero, luxemburg_norm, n_of_r, OrliczFunction};
use crate::riesz::{build_riesz, build_x, min_nu, mix, RieszSpec, DEFAULT_S_INTERVAL};
use crate::trigpoly::{fejer, grid_size, mollify_grid, GridFunction, GridMask, TrigPoly, C64};
use std::f64::consts::PI;

/// Tolerances tried, tightest first, when choosing `nu = min_nu(N, ...)`.
pub const NU_LADDER: [f64; 8] = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0];
/// Largest `nu^N` a block may use.
pub const MAX_NU_POW: u64 = 1 << 19;
pub const N_CANDIDATES: [usize; 5] = [4, 6, 8, 10, 12];
const MAX_ATOMS: usize = 40;
const DELTA_HALVINGS: usize = 3;

/// Defining inequality of a level set of `X`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelRule {
    /// `lo <= X <= hi`
    Band { lo: f64, hi: f64 },
    /// `|X - center| <= radius`
    Near { center: f64, radius: f64 },
    /// `X > lo`
    Above { lo: f64 },
    /// `X >= lo`
    AtLeast { lo: f64 },
}

impl LevelRule {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            LevelRule::Band { lo, hi } => lo <= x && x <= hi,
            LevelRule::Near { center, radius } => (x - center).abs() <= radius,
            LevelRule::Above { lo } => x > lo,
            LevelRule::AtLeast { lo } => x >= lo,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            LevelRule::Band { lo, hi } => format!("{lo} <= X <= {hi}"),
            LevelRule::Near { center, radius } => format!("|X - {center}| <= {radius}"),
            LevelRule::Above { lo } => format!("X > {lo}"),
            LevelRule::AtLeast { lo } => format!("X >= {lo}"),
        }
    }

    pub fn mask(&self, x: &GridFunction) -> GridMask {
        GridMask::from_samples(x, |v| self.contains(v))
    }
}

#[derive(Clone, Debug)]
pub enum PrincipalVariant {
    C0 { eps: f64, nu: u64 },
    Lq { eps: f64, q: f64 },
    Orlicz { eps: f64, phi: OrliczFunction },
    Generators { eps: f64, p: f64 },
    LqWithMeasure { eps: f64, q: f64 },
}

impl PrincipalVariant {
    pub fn name(&self) -> &'static str {
        match self {
            PrincipalVariant::C0 { .. } => "c0",
            PrincipalVariant::Lq { .. } => "lq",
            PrincipalVariant::Orlicz { .. } => "orlicz",
            PrincipalVariant::Generators { .. } => "generators",
            PrincipalVariant::LqWithMeasure { .. } => "lq_with_measure",
        }
    }

    pub fn eps(&self) -> f64 {
        match *self {
            PrincipalVariant::C0 { eps, .. }
            | PrincipalVariant::Lq { eps, .. }
            | PrincipalVariant::Orlicz { eps, .. }
            | PrincipalVariant::Generators { eps, .. }
            | PrincipalVariant::LqWithMeasure { eps, .. } => eps,
        }
    }
}

/// How the coefficients of `f - 1` are measured.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockNorm {
    /// `max_{n != 0} |f^(n)|`
    Max,
    /// `(sum_{n != 0} |f^(n)|^q)^{1/q}`
    Lq(f64),
    /// Luxemburg norm of `{f^(n)}_{n != 0}`
    Orlicz(OrliczFunction),
}

impl BlockNorm {
    pub fn of(&self, f: &TrigPoly) -> Result<f64> {
        Ok(match self {
            BlockNorm::Max => f.terms().iter().filter(|t| t.0 != 0).map(|t| t.1.norm()).fold(0.0, f64::max),
            BlockNorm::Lq(q) => a_norm_nonzero(f, *q),
            BlockNorm::Orlicz(phi) => {
                let v: Vec<f64> = f.terms().iter().filter(|t| t.0 != 0).map(|t| t.1.norm()).collect();
                if v.is_empty() {
                    0.0
                } else {
                    luxemburg_norm(&v, phi)?.value
                }
            }
        })
    }

    pub fn describe(&self) -> String {
        match self {
            BlockNorm::Max => "max_{n!=0} |f^(n)|".into(),
            BlockNorm::Lq(q) => format!("(sum_{{n!=0}} |f^(n)|^{q})^(1/{q})"),
            BlockNorm::Orlicz(_) => "Luxemburg norm of {f^(n)}_{n!=0}".into(),
        }
    }
}

/// Everything a block claims, in a form the checker can re-evaluate.
#[derive(Clone, Debug)]
pub struct BlockClaims {
    pub norm: BlockNorm,
    pub eps: f64,
    pub rule: LevelRule,
    pub nu: u64,
    /// `||X^||_p <= 1` with this `p`.
    pub x_lp: Option<f64>,
    /// `||X||_inf <= 1` and `||X||_{A_p} < eps` with this `p`.
    pub x_helson: Option<f64>,
    /// `||g - 1||_{A_r} < eps` with this `r`.
    pub g_exponent: Option<f64>,
    /// Check that the spectrum of `X` avoids `(-nu, nu)`.
    pub x_spectrum: bool,
}

/// Support threshold on grid values.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Grid points where `|f| > SUPPORT_TOL` but the mask is off.
pub fn support_violations(f: &GridFunction, mask: &GridMask) -> usize {
    f.samples().iter().zip(mask.bits()).filter(|(v, &m)| !m && v.norm() > SUPPORT_TOL).count()
}

/// Recomputes every clause from `f`, `X`, optional `g` and the mask.
pub fn verify_block(
    f: &TrigPoly,
    x: &TrigPoly,
    g: Option<&TrigPoly>,
    mask: &GridMask,
    claims: &BlockClaims,
) -> Result<Certificate> {
    let grid = mask.len();
    let mut cert = Certificate::new("principal");
    if mask.count() == 0 {
        cert.note("degenerate: empty set");
    }
    let fs = f.sample(grid);
    let xs = x.sample(grid);
    cert.check("|f^(0) - 1|", (f.coeff(0) - C64::new(1.0, 0.0)).norm(), "<=", 1e-9);
    cert.check(claims.norm.describe(), claims.norm.of(f)?, "<", claims.eps);
    cert.check("grid points of supp f outside K", support_violations(&fs, mask) as f64, "<=", 0.0);
    let off_rule = xs.re().iter().zip(mask.bits()).filter(|(v, &m)| m && !claims.rule.contains(**v)).count();
    cert.check(format!("grid points of K violating {}", claims.rule.describe()), off_rule as f64, "<=", 0.0);
    if !x.is_real(1e-12) {
        cert.check("X is real", 0.0, ">", 0.0);
    }
    if claims.x_spectrum {
        let m = x.min_abs_frequency().unwrap_or(u64::MAX);
        cert.check("min |frequency| of X", m as f64, ">=", claims.nu as f64);
    }
    if let Some(p) = claims.x_lp {
        cert.check(format!("||X^||_{p}"), a_norm(x, p), "<=", 1.0);
    }
    if let Some(p) = claims.x_helson {
        let g = grid_size(x.degree()).unwrap_or(grid).max(grid);
        cert.check("||X||_inf", x.sample(g).max_abs(), "<=", 1.0);
        cert.check(format!("||X||_A_{p}"), a_norm(x, p), "<", claims.eps);
    }
    if let (Some(g), Some(r)) = (g, claims.g_exponent) {
        let gs = g.sample(grid);
        cert.check("|g^(0) - 1|", (g.coeff(0) - C64::new(1.0, 0.0)).norm(), "<=", 1e-9);
        cert.check("grid min of g", gs.min_re(), ">=", -1e-9);
        cert.check("grid points of supp g outside K", support_violations(&gs, mask) as f64, "<=", 0.0);
        cert.check(format!("||g - 1||_A_{r}"), a_norm(&g.sub(&TrigPoly::constant(1.0)), r), "<", claims.eps);
    }
    let mut polys = vec![f, x];
    if let Some(g) = g {
        polys.push(g);
    }
    cert.digest = digest(&polys, &[mask]);
    Ok(cert)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalParams {
    pub variant: &'static str,
    pub eps: f64,
    pub n: usize,
    pub nu: u64,
    pub delta: f64,
    pub r: Option<f64>,
    pub eta: Option<f64>,
    pub grid: usize,
    /// Kernel half-width in grid nodes; 0 means the grid identity.
    pub mollifier_reach: usize,
    pub atoms: usize,
    pub rho_total_variation: f64,
    /// `max_s (int_{T \ K'} lambda_s^2)^{1/2}` over the ends and middle of
    /// the s-interval.
    pub restriction_l2: f64,
}

#[derive(Clone, Debug)]
pub struct PrincipalOutput {
    pub f: TrigPoly,
    pub k: GridMask,
    pub rule: LevelRule,
    pub x: TrigPoly,
    pub g: Option<TrigPoly>,
    pub claims: BlockClaims,
    pub cert: Certificate,
    pub params: PrincipalParams,
}

/// Restricts grid samples to `inner`, divides by the mean and mollifies,
/// halving the radius until the support fits in `outer`.
/// Returns the block, the restricted-out mask and the kernel reach.
fn shape(lambda: &GridFunction, inner: &GridMask, outer: &GridMask) -> Result<(TrigPoly, usize)> {
    let h = lambda.masked(inner);
    let h0 = h.mean().re;
    if !(h0.abs() > 1e-300) {
        return Err(Error::Invalid("restricted product has zero mean".into()));
    }
    let inv = C64::new(1.0 / h0, 0.0);
    let normalized = GridFunction::new(h.samples().iter().map(|v| v * inv).collect())?;
    let mut radius = 16.0 * 2.0 * PI / lambda.len() as f64;
    for _ in 0..=10 {
        let (m, reach) = mollify_grid(&normalized, radius);
        if support_violations(&m, outer) == 0 {
            return Ok((m.interpolant(), reach));
        }
        radius /= 2.0;
    }
    Err(Error::SearchExhausted("mollified support leaves K after 10 halvings".into()))
}

/// `nu = min_nu(N, cos, q, tol)` for the tightest ladder tolerance keeping
/// `nu^N <= MAX_NU_POW` and the grid under its cap.
pub fn ladder_nu(n: usize, q: f64, floor: u64, max_grid: Option<usize>) -> Option<u64> {
    let cos = TrigPoly::cosine(1);
    NU_LADDER.iter().find_map(|&tol| {
        let nu = min_nu(n, &cos, q, tol).ok()?.max(floor);
        let pow = nu.checked_pow(n as u32)?;
        let deg: u64 = (1..=n as u32).map(|j| nu.pow(j)).sum();
        let g = grid_size(deg).ok()?;
        (pow <= MAX_NU_POW && max_grid.map_or(true, |m| g <= m)).then_some(nu)
    })
}

/// Where a block must live and how fast its frequencies must start.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SearchOptions {
    /// Common grid for every block of a pipeline.
    pub grid: Option<usize>,
    /// `nu` must be at least this.
    pub nu_floor: u64,
}

fn s_interval(variant: &PrincipalVariant, delta: f64) -> (f64, f64) {
    match variant {
        PrincipalVariant::C0 { .. } => (0.5 - delta, 0.5),
        _ => DEFAULT_S_INTERVAL,
    }
}

struct Attempt<'a> {
    variant: &'a PrincipalVariant,
    spec: RieszSpec,
    delta: f64,
    inner: LevelRule,
    claims: BlockClaims,
    r: Option<f64>,
    eta: Option<f64>,
    /// `s` for the positive companion `g`.
    g_s: Option<f64>,
    grid: Option<usize>,
}

fn attempt(a: Attempt<'_>, rho: &AtomicMeasure) -> Result<PrincipalOutput> {
    let spec = &a.spec;
    let lambda = mix(rho, spec)?;
    let x = build_x(spec);
    let own = grid_size(lambda.degree().max(x.degree()))?;
    let grid = match a.grid {
        Some(g) if g >= own => g,
        Some(g) => return Err(Error::GridTooSmall { grid: g, needed: 8 * lambda.degree() }),
        None => own,
    };
    let ls = lambda.sample(grid);
    let xs = x.sample(grid);
    let inner = a.inner.mask(&xs);
    let outer = a.claims.rule.mask(&xs);
    let (f, reach) = shape(&ls, &inner, &outer)?;
    let (lo, hi) = rho.interval();
    let mut restriction_l2 = 0.0f64;
    let out = inner.not();
    for s in [lo + 1e-9 * (hi - lo), 0.5 * (lo + hi), hi - 1e-9 * (hi - lo)] {
        let l = build_riesz(&spec.with_s(s))?;
        // plain quadrature: lambda_s may be signed when its scale exceeds 1
        let v = l.sample(grid).masked(&out).mean_sq();
        restriction_l2 = restriction_l2.max(v.sqrt());
    }
    let g = match a.g_s {
        Some(s) => {
            let l = build_riesz(&spec.with_s(s))?;
            Some(shape(&l.sample(grid), &inner, &outer)?.0)
        }
        None => None,
    };
    let mut cert = verify_block(&f, &x, g.as_ref(), &outer, &a.claims)?;
    cert.kind = format!("principal_{}", a.variant.name());
    let tv = rho.total_variation();
    cert.note(format!("restricted out {}", a.inner.describe()));
    cert.note(format!(
        "restriction L2 {restriction_l2:.3e} against the proof's target delta/||rho|| = {:.3e}",
        a.delta / tv
    ));
    if reach == 0 {
        cert.note("mollifier reduced to the grid identity");
    }
    Ok(PrincipalOutput {
        f,
        k: outer,
        rule: a.claims.rule,
        x,
        g,
        claims: a.claims,
        cert,
        params: PrincipalParams {
            variant: a.variant.name(),
            eps: a.variant.eps(),
            n: spec.n,
            nu: spec.nu,
            delta: a.delta,
            r: a.r,
            eta: a.eta,
            grid,
            mollifier_reach: reach,
            atoms: rho.atoms().len(),
            rho_total_variation: tv,
            restriction_l2,
        },
    })
}

/// Result of a parameter search: the first passing block, or the one whose
/// main norm came closest.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: Option<PrincipalOutput>,
    pub tried: usize,
}

impl SearchOutcome {
    pub fn passed(&self) -> bool {
        self.best.as_ref().is_some_and(|b| b.cert.pass())
    }
}

fn score(o: &PrincipalOutput) -> (usize, f64) {
    let fails = o.cert.failing().len();
    let main = o.cert.clauses.get(1).map(|c| c.lhs / c.rhs).unwrap_or(f64::INFINITY);
    (fails, main)
}

fn keep_best(best: &mut Option<PrincipalOutput>, cand: PrincipalOutput) {
    let better = match best {
        None => true,
        Some(b) => {
            let (fb, mb) = score(b);
            let (fc, mc) = score(&cand);
            (fc, mc) < (fb, mb) || (fc == fb && mc < mb)
        }
    };
    if better {
        *best = Some(cand);
    }
}

fn validate_variant(v: &PrincipalVariant) -> Result<()> {
    let eps = v.eps();
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    match v {
        PrincipalVariant::C0 { nu, .. } if *nu < 3 => Err(Error::Invalid("nu must be at least 3".into())),
        PrincipalVariant::Lq { q, .. } | PrincipalVariant::LqWithMeasure { q, .. } if !(*q > 2.0) => {
            Err(Error::Invalid("q must exceed 2".into()))
        }
        PrincipalVariant::Generators { p, .. } if !(*p > 1.0 && *p < 2.0) => {
            Err(Error::Invalid("p must lie in (1, 2)".into()))
        }
        PrincipalVariant::Orlicz { phi, .. } => phi.validate(1.0, 2000),
        _ => Ok(()),
    }
}

/// Searches `delta`, `N` (and `r`) for a block whose certificate passes.
pub fn principal_search(variant: &PrincipalVariant) -> Result<SearchOutcome> {
    principal_search_with(variant, SearchOptions::default())
}

pub fn principal_search_with(variant: &PrincipalVariant, opts: SearchOptions) -> Result<SearchOutcome> {
    validate_variant(variant)?;
    let eps = variant.eps();
    let mut best: Option<PrincipalOutput> = None;
    let mut tried = 0;
    let mut delta = eps / 8.0;
    for _ in 0..=DELTA_HALVINGS {
        let plans = attempts(variant, delta, opts)?;
        if plans.is_empty() {
            break;
        }
        let rho = match auto_moment_killer(s_interval(variant, delta), delta, MAX_ATOMS) {
            Ok(r) => r,
            Err(Error::Infeasible { .. }) => break,
            Err(e) => return Err(e),
        };
        for a in plans {
            tried += 1;
            let out = match attempt(a, &rho) {
                Ok(o) => o,
                Err(Error::SearchExhausted(_)) | Err(Error::GridCap { .. }) | Err(Error::GridTooSmall { .. }) => continue,
                Err(e) => return Err(e),
            };
            let pass = out.cert.pass();
            keep_best(&mut best, out);
            if pass {
                return Ok(SearchOutcome { best, tried });
            }
        }
        delta /= 2.0;
    }
    Ok(SearchOutcome { best, tried })
}

/// The block, or `SearchExhausted` carrying the best achieved bounds.
pub fn principal_build(variant: &PrincipalVariant) -> Result<PrincipalOutput> {
    let outcome = principal_search(variant)?;
    match outcome.best {
        Some(b) if b.cert.pass() => Ok(b),
        Some(b) => {
            let fails: Vec<String> = b
                .cert
                .failing()
                .iter()
                .map(|c| format!("{} = {:.6e} (need {} {:.6e})", c.description, c.lhs, c.relation, c.rhs))
                .collect();
            Err(Error::SearchExhausted(format!(
                "{} after {} candidates; best at N = {}, nu = {}: {}",
                variant.name(),
                outcome.tried,
                b.params.n,
                b.params.nu,
                fails.join("; ")
            )))
        }
        None => Err(Error::SearchExhausted(format!(
            "{}: no admissible (N, nu) within nu^N <= {MAX_NU_POW}",
            variant.name()
        ))),
    }
}

fn attempts(variant: &PrincipalVariant, delta: f64, opts: SearchOptions) -> Result<Vec<Attempt<'_>>> {
    let floor = opts.nu_floor.max(3);
    let (lo, hi) = s_interval(variant, delta);
    let mid = 0.5 * (lo + hi);
    let lq_claims = |eps: f64, q: f64, nu: u64, norm: BlockNorm, p_check: bool| BlockClaims {
        norm,
        eps,
        rule: LevelRule::Band { lo: 0.01, hi: 100.0 },
        nu,
        x_lp: p_check.then(|| q / (q - 1.0)),
        x_helson: None,
        g_exponent: None,
        x_spectrum: true,
    };
    let inner_lq = LevelRule::Band { lo: 1.0 / 90.0, hi: 90.0 };
    let mut out = Vec::new();
    match variant {
        PrincipalVariant::C0 { eps, nu } => {
            let nu = &(*nu).max(floor);
            for &n in &N_CANDIDATES {
                if nu.checked_pow(n as u32).map_or(true, |p| p > MAX_NU_POW) {
                    continue;
                }
                out.push(Attempt {
                    variant,
                    spec: RieszSpec::c0(*nu, n, mid),
                    delta,
                    inner: LevelRule::Near { center: 1.0, radius: 3.0 * delta },
                    claims: BlockClaims {
                        norm: BlockNorm::Max,
                        eps: *eps,
                        rule: LevelRule::Near { center: 1.0, radius: *eps },
                        nu: *nu,
                        x_lp: None,
                        x_helson: None,
                        g_exponent: None,
                        x_spectrum: true,
                    },
                    r: None,
                    eta: None,
                    g_s: None,
                    grid: opts.grid,
                });
            }
        }
        PrincipalVariant::Lq { eps, q } | PrincipalVariant::LqWithMeasure { eps, q } => {
            let with_g = matches!(variant, PrincipalVariant::LqWithMeasure { .. });
            for &n in &N_CANDIDATES {
                let Some(nu) = ladder_nu(n, *q, floor, opts.grid) else { continue };
                let mut claims = lq_claims(*eps, *q, nu, BlockNorm::Lq(*q), true);
                let mut g_s = None;
                if with_g {
                    claims.g_exponent = Some(q + eps);
                    // smallest admissible s keeps the factors positive longest
                    g_s = Some(lo + 0.01 * (hi - lo));
                }
                out.push(Attempt {
                    variant,
                    spec: RieszSpec::lq(*q, nu, n, mid),
                    delta,
                    inner: inner_lq,
                    claims,
                    r: None,
                    eta: None,
                    g_s,
                    grid: opts.grid,
                });
            }
        }
        PrincipalVariant::Orlicz { eps, phi } => {
            let mut r = 0.95 * eps;
            while r > 1e-3 {
                let n = n_of_r(phi, r)? as usize;
                if let Some(nu) = ladder_nu(n, f64::INFINITY, floor, opts.grid) {
                    out.push(Attempt {
                        variant,
                        spec: RieszSpec::orlicz(r, nu, n, mid),
                            delta,
                        inner: inner_lq,
                        claims: lq_claims(*eps, 2.0, nu, BlockNorm::Orlicz(phi.clone()), false),
                        r: Some(r),
                        eta: None,
                        g_s: None,
                        grid: opts.grid,
                    });
                }
                if n > 24 {
                    break;
                }
                r *= 0.9;
            }
        }
        PrincipalVariant::Generators { eps, p } => {
            let q = p / (p - 1.0);
            for n in 1..=12usize {
                let eta = eps.recip() * (n as f64).powf(-1.0 / q);
                if !(eta < 1.0) {
                    continue;
                }
                let aux = build_auxiliary_phi(eta, *p)?;
                let phi = aux.phi;
                let nu = (2 * phi.degree() + 1).max(floor);
                if nu.checked_pow(n as u32).map_or(true, |v| v > MAX_NU_POW) {
                    continue;
                }
                out.push(Attempt {
                    variant,
                    spec: RieszSpec::generators(phi, nu, n, mid),
                    delta,
                    inner: LevelRule::AtLeast { lo: 1.0 / 40.0 },
                    claims: BlockClaims {
                        norm: BlockNorm::Lq(q),
                        eps: *eps,
                        rule: LevelRule::Above { lo: 1.0 / 50.0 },
                        nu,
                        x_lp: None,
                        x_helson: Some(*p),
                        g_exponent: None,
                        x_spectrum: true,
                    },
                    r: None,
                    eta: Some(eta),
                    g_s: None,
                    grid: opts.grid,
                });
            }
        }
    }
    Ok(out)
}

/// Plateau profile on `[0, 1]`: zero near both ends, `0.999` in the middle,
/// with smooth transitions of width `w` after a gap `a`.
pub fn psi(u: f64) -> f64 {
    const A: f64 = 0.005;
    const W: f64 = 0.02;
    fn e(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }
    fn step(x: f64) -> f64 {
        let (a, b) = (e(x), e(1.0 - x));
        if a + b == 0.0 {
            0.0
        } else {
            a / (a + b)
        }
    }
    0.999 * step((u - A) / W) * step((1.0 - A - u) / W)
}

/// `int_0^1 psi^2` by the midpoint rule.
pub fn psi_l2_sq() -> f64 {
    let n = 200_000;
    (0..n).map(|i| psi((i as f64 + 0.5) / n as f64).powi(2)).sum::<f64>() / n as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryPhi {
    pub phi: TrigPoly,
    pub eta: f64,
    pub p: f64,
    pub m: usize,
    pub nu: u64,
    pub sup: f64,
    pub l2: f64,
    pub mean: f64,
    pub a_p: f64,
    pub a_q: f64,
}

/// Smallest `m` with `1/(3 eta) < m^{(2-p)/p} < 3/eta`.
pub fn auxiliary_m(eta: f64, p: f64) -> usize {
    let e = (2.0 - p) / p;
    let mut m = 1usize;
    while (m as f64).powf(e) <= 1.0 / (3.0 * eta) {
        m += 1;
    }
    m
}

/// `sum_{j=1}^m Phi(nu^j t) Psi_{I_j}(t)` with mean removed and Fejer
/// smoothing, where `Phi = Psi_[0,pi] - Psi_[pi,2pi]` and `I_j` are the
/// `m` equal pieces of `[0, 2 pi]`.
pub fn build_auxiliary_phi(eta: f64, p: f64) -> Result<AuxiliaryPhi> {
    if !(eta > 0.0 && eta < 1.0) || !(p > 1.0 && p < 2.0) {
        return Err(Error::Invalid(format!("need 0 < eta < 1 and 1 < p < 2, got ({eta}, {p})")));
    }
    let q = p / (p - 1.0);
    let m = auxiliary_m(eta, p);
    let nu = 3u64;
    let top = nu.pow(m as u32) as f64;
    // resolve the sharpest transition (width 0.02 pi / nu^m) with 16 points
    let g = ((32.0 * top / 0.02).ceil() as usize).next_power_of_two().max(1 << 12);
    let big_phi = |t: f64| {
        let t = t.rem_euclid(2.0 * PI);
        if t < PI {
            psi(t / PI)
        } else {
            -psi((t - PI) / PI)
        }
    };
    let piece = 2.0 * PI / m as f64;
    let mut samples = vec![0.0; g];
    for j in 0..m {
        let d = nu.pow(j as u32 + 1) as f64;
        let nodes: Vec<(usize, f64, f64)> = (0..g)
            .filter_map(|i| {
                let t = 2.0 * PI * i as f64 / g as f64;
                let local = psi((t - j as f64 * piece) / piece);
                (((t / piece).floor() as usize).min(m - 1) == j && local != 0.0).then_some((i, t, local))
            })
            .collect();
        let at = |theta: f64| -> Vec<f64> { nodes.iter().map(|&(_, t, l)| big_phi(d * t - theta) * l).collect() };
        let mean = |theta: f64| at(theta).iter().sum::<f64>();
        // Phi(. - pi) = -Phi, so the piece mean changes sign on [0, pi]; a
        // phase with zero mean exists and leaves every A_r norm unchanged.
        let (mut lo, mut hi) = (0.0, PI);
        let flo = mean(lo);
        if flo != 0.0 {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (mean(mid) > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        for (&(i, _, _), v) in nodes.iter().zip(at(lo)) {
            samples[i] = v;
        }
    }
    let raw = GridFunction::from_real(&samples)?.interpolant();
    let c = raw.coeff(0).re;
    let centered = raw.sub(&TrigPoly::constant(c));
    let phi = fejer(&centered, g as u64 / 8);
    let phi = TrigPoly::from_terms(phi.terms().iter().filter(|t| t.0 != 0).copied());
    let check = grid_size(phi.degree())?.max(4 * g);
    let vals = phi.sample(check);
    Ok(AuxiliaryPhi {
        sup: vals.max_abs(),
        l2: phi.energy().sqrt(),
        mean: phi.coeff(0).norm(),
        a_p: a_norm(&phi, p),
        a_q: a_norm(&phi, q),
        phi,
        eta,
        p,
        m,
        nu,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SumDilationRow {
    pub nu: u64,
    pub achieved: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SumDilationReport {
    pub limit: f64,
    pub rows: Vec<SumDilationRow>,
    /// Gaps never grow by more than 1e-12 along the sequence.
    pub monotone: bool,
}

/// `|| sum_j f(nu^j t) T_j ||_{A_r}` against `||f||_{A_r} (sum ||T_j||^r)^{1/r}`.
pub fn check_sum_dilations(f: &TrigPoly, ts: &[TrigPoly], r: f64, nus: &[u64]) -> Result<SumDilationReport> {
    if f.coeff(0).norm() > 1e-12 {
        return Err(Error::Invalid("f must have zero mean".into()));
    }
    if !(r >= 1.0) {
        return Err(Error::Invalid("r must be at least 1".into()));
    }
    let tn: Vec<f64> = ts.iter().map(|t| a_norm(t, r)).collect();
    let limit = a_norm(f, r) * crate::norms::lr_norm(tn, r);
    let mut rows = Vec::new();
    for &nu in nus {
        let mut sum = TrigPoly::zero();
        let mut pow = 1u64;
        for t in ts {
            pow = pow
                .checked_mul(nu)
                .ok_or_else(|| Error::Invalid("nu^j overflows".into()))?;
            sum = sum.add(&f.dilate(pow).multiply(t));
        }
        let achieved = a_norm(&sum, r);
        rows.push(SumDilationRow { nu, achieved, gap: (achieved - limit).abs() });
    }
    let monotone = rows.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-12);
    Ok(SumDilationReport { limit, rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_rules() {
        assert!(LevelRule::Band { lo: 0.01, hi: 100.0 }.contains(0.01));
        assert!(!LevelRule::Above { lo: 0.02 }.contains(0.02));
        assert!(LevelRule::Near { center: 1.0, radius: 0.1 }.contains(1.1 - 1e-12));
    }

    #[test]
    fn auxiliary_m_band() {
        for (eta, m) in [(0.5, 1), (0.3, 2), (0.2, 5)] {
            let got = auxiliary_m(eta, 1.5);
            assert_eq!(got, m);
            let v = (got as f64).powf(1.0 / 3.0);
            assert!(1.0 / (3.0 * eta) < v && v < 3.0 / eta);
        }
    }

    #[test]
    fn psi_profile() {
        assert_eq!(psi(0.0), 0.0);
        assert_eq!(psi(0.004), 0.0);
        assert!(psi(0.5) < 1.0);
        assert!(psi_l2_sq() > 0.95);
    }

    #[test]
    fn single_dilation_is_isometric() {
        let f = TrigPoly::cosine(1).add(&TrigPoly::cosine(2).scale_re(0.5));
        let rep = check_sum_dilations(&f, &[TrigPoly::constant(1.0)], 1.5, &[3, 5, 9]).unwrap();
        for row in &rep.rows {
            assert!(row.gap < 1e-13);
        }
    }
}
