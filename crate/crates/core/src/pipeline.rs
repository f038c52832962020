//! Inductive constructions over principal blocks: product iteration with a
//! budget ledger, the no-measure certificates, Kaufman shrinking, the
//! positive-measure pipeline, the generator scheme and the transfer to the
//! line.

use crate::cert::{digest, Certificate};
use crate::error::{Error, Result};
use crate::norms::{a_norm, luxemburg_norm, OrliczFunction};
use crate::principal::{
    principal_search_with, support_violations, verify_block, BlockClaims, PrincipalOutput, PrincipalVariant, SearchOptions,
};
use crate::trigpoly::{grid_size, GridFunction, GridMask, TrigPoly, C64};

/// Default common grid for multi-stage runs.
pub const PIPELINE_GRID: usize = 1 << 20;
pub const MAX_RETRIES: usize = 5;

/// Norm used for stage increments.
#[derive(Clone, Debug, PartialEq)]
pub enum IncrementNorm {
    /// `A_q` over all coefficients; `q = inf` is the max modulus.
    A(f64),
    Orlicz(OrliczFunction),
}

impl IncrementNorm {
    pub fn of(&self, a: &TrigPoly) -> Result<f64> {
        match self {
            IncrementNorm::A(q) => Ok(a_norm(a, *q)),
            IncrementNorm::Orlicz(phi) => {
                let v: Vec<f64> = a.terms().iter().map(|t| t.1.norm()).collect();
                if v.is_empty() {
                    return Ok(0.0);
                }
                Ok(luxemburg_norm(&v, phi)?.value)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IterVariant {
    C0,
    Lq { q: f64 },
    Orlicz { phi: OrliczFunction },
}

impl IterVariant {
    fn block(&self, eps: f64, nu: u64) -> PrincipalVariant {
        match self {
            IterVariant::C0 => PrincipalVariant::C0 { eps, nu },
            IterVariant::Lq { q } => PrincipalVariant::Lq { eps, q: *q },
            IterVariant::Orlicz { phi } => PrincipalVariant::Orlicz { eps, phi: phi.clone() },
        }
    }

    pub fn increment_norm(&self) -> IncrementNorm {
        match self {
            IterVariant::C0 => IncrementNorm::A(f64::INFINITY),
            IterVariant::Lq { q } => IncrementNorm::A(*q),
            IterVariant::Orlicz { phi } => IncrementNorm::Orlicz(phi.clone()),
        }
    }

    pub fn certificate_kind(&self) -> CertKind {
        match self {
            IterVariant::C0 => CertKind::NomeasureC0,
            IterVariant::Lq { .. } => CertKind::NomeasureLq,
            IterVariant::Orlicz { .. } => CertKind::NomeasureOrlicz,
        }
    }
}

/// How `eps_{j+1}` is picked from the budget `2^{-2-j}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsRule {
    /// `eps_{j+1} = 0.99 * 2^{-2-j} / ||S_j||_A`, which makes the product
    /// bound `||S_j||_A eps_{j+1} < 2^{-2-j}` hold outright.
    Wiener,
    /// `eps_{j+1} = 0.99 * 2^{-2-j}`; the verified increment decides.
    Budget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub eps: f64,
    pub nu: u64,
    pub n: usize,
    pub budget: f64,
    pub increment: f64,
    /// `||S_j||_A` before the stage.
    pub wiener: f64,
    pub retries: usize,
    /// Block certificate passed.
    pub block_pass: bool,
}

impl StageRecord {
    pub fn pass(&self) -> bool {
        self.block_pass && self.increment < self.budget
    }
}

#[derive(Clone, Debug)]
pub struct PipelineState {
    pub variant: IterVariant,
    pub grid: usize,
    pub s: TrigPoly,
    pub k: GridMask,
    pub blocks: Vec<PrincipalOutput>,
    pub ledger: Vec<StageRecord>,
    /// `||S_J - 1||` in the increment norm.
    pub distance_from_one: f64,
    /// Why a lenient run stopped before the requested stage count.
    pub halted: Option<String>,
}

impl PipelineState {
    pub fn nus(&self) -> Vec<u64> {
        self.blocks.iter().map(|b| b.params.nu).collect()
    }

    pub fn eps(&self) -> Vec<f64> {
        self.ledger.iter().map(|r| r.eps).collect()
    }

    pub fn xs(&self) -> Vec<TrigPoly> {
        self.blocks.iter().map(|b| b.x.clone()).collect()
    }

    pub fn stage_blocks(&self) -> Vec<StageBlock> {
        self.blocks.iter().map(StageBlock::from).collect()
    }

    pub fn certificate(&self) -> Result<Certificate> {
        iteration_certificate(&self.variant, self.grid, &self.stage_blocks())
    }
}

pub fn budget(j: usize) -> f64 {
    2f64.powi(-2 - j as i32)
}

/// Builds one stage block, shrinking `eps` on failure. Returns the best
/// block seen with its increment and the retry count.
fn stage_block(
    make: &dyn Fn(f64) -> PrincipalVariant,
    eps0: f64,
    opts: SearchOptions,
    increment: &dyn Fn(&PrincipalOutput) -> Result<f64>,
    budget: f64,
) -> Result<(PrincipalOutput, f64, usize)> {
    let mut eps = eps0;
    let mut best: Option<(PrincipalOutput, f64, usize)> = None;
    for retry in 0..=MAX_RETRIES {
        let outcome = principal_search_with(&make(eps), opts)?;
        if let Some(b) = outcome.best {
            let inc = increment(&b)?;
            let ok = b.cert.pass() && inc < budget;
            if best.as_ref().map_or(true, |(_, bi, _)| inc < *bi) || ok {
                best = Some((b, inc, retry));
            }
            if ok {
                break;
            }
        }
        eps /= 2.0;
    }
    best.ok_or_else(|| Error::SearchExhausted(format!("no admissible block for eps <= {eps0:.3e}")))
}

/// What a stage contributes to a certificate, recoverable from dumps.
#[derive(Clone, Debug)]
pub struct StageBlock {
    pub f: TrigPoly,
    pub x: TrigPoly,
    pub k: GridMask,
    pub g: Option<TrigPoly>,
    pub claims: BlockClaims,
    pub n: usize,
    pub r: Option<f64>,
}

impl From<&PrincipalOutput> for StageBlock {
    fn from(b: &PrincipalOutput) -> Self {
        Self {
            f: b.f.clone(),
            x: b.x.clone(),
            k: b.k.clone(),
            g: b.g.clone(),
            claims: b.claims.clone(),
            n: b.params.n,
            r: b.params.r,
        }
    }
}

/// Stages `S_{j+1} = S_j f_{j+1}` with every block on one common grid, so
/// that node values of the exact products vanish off the nested masks.
/// Fails with `ScheduleViolation` at the first stage over budget.
pub fn run_iteration(variant: &IterVariant, stages: usize, rule: EpsRule, grid: Option<usize>) -> Result<PipelineState> {
    let st = iterate(variant, stages, rule, grid, true)?;
    Ok(st)
}

/// As `run_iteration` but keeps going past budget violations; the
/// certificate then carries the failing clauses. Stops early only when no
/// block can be built at all, recording why in `halted`.
pub fn run_iteration_lenient(variant: &IterVariant, stages: usize, rule: EpsRule, grid: Option<usize>) -> Result<PipelineState> {
    iterate(variant, stages, rule, grid, false)
}

fn iterate(variant: &IterVariant, stages: usize, rule: EpsRule, grid: Option<usize>, strict: bool) -> Result<PipelineState> {
    let g = grid.unwrap_or(PIPELINE_GRID);
    let norm = variant.increment_norm();
    let mut s = TrigPoly::constant(1.0);
    let mut k = GridMask::full(g);
    let mut blocks = Vec::new();
    let mut ledger = Vec::new();
    let mut halted = None;
    let mut nu_prev = 2u64;
    for j in 0..stages {
        let b = budget(j);
        let wiener = a_norm(&s, 1.0);
        let eps0 = match rule {
            EpsRule::Wiener => 0.99 * b / wiener,
            EpsRule::Budget => 0.99 * b,
        }
        .min(0.99);
        let opts = SearchOptions { grid: Some(g), nu_floor: nu_prev + 1 };
        let make = |eps: f64| variant.block(eps, nu_prev + 1);
        let inc = |blk: &PrincipalOutput| norm.of(&s.multiply(&blk.f).sub(&s));
        let (blk, increment, retries) = match stage_block(&make, eps0, opts, &inc, b) {
            Ok(x) => x,
            Err(e) if !strict => {
                halted = Some(format!("stage {j}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let rec = StageRecord {
            stage: j,
            eps: blk.params.eps,
            nu: blk.params.nu,
            n: blk.params.n,
            budget: b,
            increment,
            wiener,
            retries,
            block_pass: blk.cert.pass(),
        };
        if strict && !rec.pass() {
            return Err(Error::ScheduleViolation { stage: j, increment, budget: b });
        }
        s = s.multiply(&blk.f);
        k = k.and(&blk.k);
        nu_prev = blk.params.nu;
        ledger.push(rec);
        blocks.push(blk);
    }
    let distance_from_one = norm.of(&s.sub(&TrigPoly::constant(1.0)))?;
    Ok(PipelineState { variant: variant.clone(), grid: g, s, k, blocks, ledger, distance_from_one, halted })
}

/// Recomputes every clause of an iteration from its blocks: each block
/// certificate, the stage budgets, nesting, support of `S_J` and the
/// no-measure certificate for the `X_j`.
pub fn iteration_certificate(variant: &IterVariant, grid: usize, blocks: &[StageBlock]) -> Result<Certificate> {
    let kind = variant.certificate_kind();
    let mut cert = Certificate::new(kind.name());
    if blocks.is_empty() {
        cert.check("stages completed", 0.0, ">=", 1.0);
        return Ok(cert);
    }
    let norm = variant.increment_norm();
    let one = TrigPoly::constant(1.0);
    let mut s = one.clone();
    let mut k = GridMask::full(grid);
    let mut total = 0.0;
    for (j, b) in blocks.iter().enumerate() {
        if b.k.len() != grid {
            return Err(Error::Invalid(format!("stage {j} mask is not on the common grid")));
        }
        let bc = verify_block(&b.f, &b.x, b.g.as_ref(), &b.k, &b.claims)?;
        cert.absorb(&format!("block {}", j + 1), &bc);
        let next = s.multiply(&b.f);
        let inc = norm.of(&next.sub(&s))?;
        cert.check(format!("||S_{} - S_{j}||", j + 1), inc, "<", budget(j));
        total += inc;
        let kj = k.and(&b.k);
        cert.check(format!("K_{} inside K_{j}", j + 1), (!kj.is_subset_of(&k)) as u8 as f64, "<=", 0.0);
        s = next;
        k = kj;
    }
    cert.check("sum of increments", total, "<", 1.0);
    cert.check("||S_J - 1||", norm.of(&s.sub(&one))?, "<", 1.0);
    let ss = s.sample(grid);
    cert.check("grid points of supp S_J outside K", support_violations(&ss, &k) as f64, "<=", 0.0);
    let params = CertParams {
        nus: blocks.iter().map(|b| b.claims.nu).collect(),
        eps: blocks.iter().map(|b| b.claims.eps).collect(),
        p: match variant {
            IterVariant::Lq { q } => q / (q - 1.0),
            _ => 1.0,
        },
        orlicz: blocks.iter().map(|b| (b.n, b.r.unwrap_or(0.0))).collect(),
    };
    let xs: Vec<TrigPoly> = blocks.iter().map(|b| b.x.clone()).collect();
    let nm = verify_certificate(kind, &k, &xs, &params)?;
    cert.absorb("X", &nm);
    cert.digest = digest(&[&s], &[&k]);
    Ok(cert)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertKind {
    NomeasureC0,
    NomeasureLq,
    NomeasureOrlicz,
    PHelson,
}

impl CertKind {
    pub fn name(&self) -> &'static str {
        match self {
            CertKind::NomeasureC0 => "nomeasure_c0",
            CertKind::NomeasureLq => "nomeasure_lq",
            CertKind::NomeasureOrlicz => "nomeasure_orlicz",
            CertKind::PHelson => "p_helson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "nomeasure_c0" => CertKind::NomeasureC0,
            "nomeasure_lq" => CertKind::NomeasureLq,
            "nomeasure_orlicz" => CertKind::NomeasureOrlicz,
            "p_helson" => CertKind::PHelson,
            _ => return Err(Error::Parse(format!("unknown certificate kind {s}"))),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CertParams {
    pub nus: Vec<u64>,
    pub eps: Vec<f64>,
    /// Conjugate exponent for `||X^||_p` and `||X||_{A_p}`.
    pub p: f64,
    /// `(N_j, r_j)` for the Orlicz form check.
    pub orlicz: Vec<(usize, f64)>,
}

/// Worst violation of `pred` over the grid points of `k`.
fn on_k(xs: &GridFunction, k: &GridMask, pred: impl Fn(f64) -> bool) -> usize {
    xs.re().iter().zip(k.bits()).filter(|(v, &m)| m && !pred(**v)).count()
}

fn on_k_extreme(xs: &GridFunction, k: &GridMask, min: bool) -> f64 {
    let it = xs.re().into_iter().zip(k.bits()).filter(|(_, &m)| m).map(|(v, _)| v);
    if min {
        it.fold(f64::INFINITY, f64::min)
    } else {
        it.fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Clause checks on the grid of `k` for each `X_j`.
pub fn verify_certificate(kind: CertKind, k: &GridMask, xs: &[TrigPoly], params: &CertParams) -> Result<Certificate> {
    if xs.is_empty() {
        return Err(Error::Invalid("X list must be non-empty".into()));
    }
    let g = k.len();
    let mut cert = Certificate::new(kind.name());
    if k.count() == 0 {
        cert.note("degenerate: empty set");
    }
    let at = |v: &[u64], j: usize| v.get(j).copied();
    for (j, x) in xs.iter().enumerate() {
        let tag = format!("X_{}", j + 1);
        let vals = x.sample(g);
        let spec_min = x.min_abs_frequency().unwrap_or(u64::MAX) as f64;
        match kind {
            CertKind::NomeasureC0 => {
                let nu = at(&params.nus, j).unwrap_or(0) as f64;
                let eps = params.eps.get(j).copied().unwrap_or(0.0);
                cert.check(format!("{tag} min |frequency|"), spec_min, ">=", nu);
                cert.check(format!("{tag} sum |X^(n)|"), a_norm(x, 1.0), "<=", 2.0 + 1e-12);
                let worst = xs_dev(&vals, k);
                cert.check(format!("{tag} max |1 - X| on K"), worst, "<=", eps);
            }
            CertKind::NomeasureLq => {
                let nu = at(&params.nus, j).unwrap_or(0) as f64;
                cert.check(format!("{tag} min |frequency|"), spec_min, ">=", nu);
                cert.check(format!("{tag} ||X^||_{}", params.p), a_norm(x, params.p), "<=", 1.0);
                cert.check(format!("{tag} grid points of K outside [1/100, 100]"), on_k(&vals, k, |v| (0.01..=100.0).contains(&v)) as f64, "<=", 0.0);
            }
            CertKind::NomeasureOrlicz => {
                let (n, r) = params.orlicz.get(j).copied().unwrap_or((0, 0.0));
                let nu = at(&params.nus, j).unwrap_or(0);
                cert.check(format!("{tag} deviation from (1/(Nr)) sum cos nu^j t"), orlicz_form_error(x, n, r, nu), "<=", 1e-12);
                cert.check(format!("{tag} grid points of K outside [1/100, 100]"), on_k(&vals, k, |v| (0.01..=100.0).contains(&v)) as f64, "<=", 0.0);
            }
            CertKind::PHelson => {
                let eps = params.eps.get(j).copied().unwrap_or(0.0);
                let fine = grid_size(x.degree()).unwrap_or(g).max(g);
                cert.check(format!("{tag} ||X||_inf"), x.sample(fine).max_abs(), "<=", 1.0);
                cert.check(format!("{tag} ||X||_A_{}", params.p), a_norm(x, params.p), "<", eps);
                if k.count() > 0 {
                    cert.check(format!("{tag} min over K"), on_k_extreme(&vals, k, true), ">", 1.0 / 50.0);
                }
            }
        }
    }
    match kind {
        CertKind::NomeasureC0 | CertKind::NomeasureLq => {
            for w in params.nus.windows(2) {
                cert.check("nu_j strictly increasing", w[1] as f64, ">", w[0] as f64);
            }
        }
        CertKind::PHelson => {
            for w in params.eps.windows(2) {
                cert.check("eps_j decreasing", w[1], "<", w[0]);
            }
        }
        CertKind::NomeasureOrlicz => {}
    }
    let refs: Vec<&TrigPoly> = xs.iter().collect();
    cert.digest = digest(&refs, &[k]);
    Ok(cert)
}

fn xs_dev(vals: &GridFunction, k: &GridMask) -> f64 {
    vals.re().iter().zip(k.bits()).filter(|(_, &m)| m).map(|(v, _)| (1.0 - v).abs()).fold(0.0, f64::max)
}

/// Max coefficient deviation of `x` from `(1/(N r)) sum_{j<=N} cos nu^j t`.
fn orlicz_form_error(x: &TrigPoly, n: usize, r: f64, nu: u64) -> f64 {
    if n == 0 || !(r > 0.0) {
        return f64::INFINITY;
    }
    let c = 0.5 / (n as f64 * r);
    let mut want = TrigPoly::zero();
    let mut pow = 1u64;
    for _ in 0..n {
        pow = pow.saturating_mul(nu);
        want = want.add(&TrigPoly::cosine(pow as i64).scale_re(2.0 * c));
    }
    x.sub(&want).terms().iter().map(|t| t.1.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct ShrinkResult {
    pub s1: TrigPoly,
    pub k1: GridMask,
    pub m: u64,
    pub distance: f64,
    /// `||S||_{A_q} ||f - 1||_{A_q}`, the limit of the distances.
    pub limit: f64,
    /// `(m, ||S f_m - S||_{A_q})` for every dilation tried.
    pub trail: Vec<(u64, f64)>,
}

/// `m` with `1_{E_m}(t) = 1_E(m t)` on the nodes of `e`'s grid.
pub fn dilate_mask(e: &GridMask, m: u64) -> GridMask {
    let g = e.len() as u64;
    GridMask::new((0..g).map(|i| e.bits()[((i * (m % g)) % g) as usize]).collect())
}

/// Smallest `m <= m_cap` with `||S f(m.) - S||_{A_q} < eps`.
pub fn shrink(s: &TrigPoly, k: &GridMask, block: &PrincipalOutput, q: f64, eps: f64, m_cap: Option<u64>) -> Result<ShrinkResult> {
    if s.is_empty() {
        return Err(Error::Invalid("S must be non-zero".into()));
    }
    if block.k.len() != k.len() {
        return Err(Error::Invalid("block and K must share a grid".into()));
    }
    let one = TrigPoly::constant(1.0);
    let fm1 = block.f.sub(&one);
    let limit = a_norm(s, q) * a_norm(&fm1, q);
    if !(limit < eps) {
        return Err(Error::Invalid(format!("need ||S|| ||f - 1|| = {limit:.6e} < eps = {eps:.6e}")));
    }
    let cap = m_cap.unwrap_or_else(|| {
        let room = (crate::trigpoly::grid_cap() as u64 / 8).saturating_sub(s.degree());
        (room / block.f.degree().max(1)).max(1)
    });
    let mut trail = Vec::new();
    for m in 1..=cap {
        let d = a_norm(&s.multiply(&fm1.dilate(m)), q);
        trail.push((m, d));
        if d < eps {
            let s1 = s.multiply(&block.f.dilate(m));
            let k1 = k.and(&dilate_mask(&block.k, m));
            return Ok(ShrinkResult { s1, k1, m, distance: d, limit, trail });
        }
    }
    Err(Error::SearchExhausted(format!("no dilation m <= {cap} brings ||S f_m - S|| below {eps:.3e}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureStage {
    pub stage: usize,
    pub eps: f64,
    pub exponent: f64,
    pub budget: f64,
    pub increment: f64,
    pub grid_min: f64,
    pub block_pass: bool,
}

#[derive(Clone, Debug)]
pub struct MeasureState {
    pub q0: f64,
    pub grid: usize,
    pub g_product: TrigPoly,
    pub s: TrigPoly,
    pub k: GridMask,
    pub blocks: Vec<PrincipalOutput>,
    pub ledger: Vec<MeasureStage>,
    pub g0_deviation: f64,
}

/// Products `G_j` of the nonnegative companions and `S_j` of the blocks.
pub fn run_measure_pipeline(q0: f64, stages: usize, grid: Option<usize>) -> Result<MeasureState> {
    if !(q0 > 2.0) {
        return Err(Error::Invalid("q must exceed 2".into()));
    }
    if stages == 0 {
        return Err(Error::Invalid("J must be at least 1".into()));
    }
    let g = grid.unwrap_or(PIPELINE_GRID);
    let mut gp = TrigPoly::constant(1.0);
    let mut s = TrigPoly::constant(1.0);
    let mut k = GridMask::full(g);
    let mut blocks = Vec::new();
    let mut ledger = Vec::new();
    let mut nu_prev = 2u64;
    for j in 0..stages {
        let b = budget(j);
        let eps0 = (0.99 * b / a_norm(&gp, 1.0)).min(0.99);
        let opts = SearchOptions { grid: Some(g), nu_floor: nu_prev + 1 };
        let make = |eps: f64| PrincipalVariant::LqWithMeasure { eps, q: q0 };
        let inc = |blk: &PrincipalOutput| -> Result<f64> {
            let gj = blk.g.as_ref().ok_or_else(|| Error::Invalid("block without g".into()))?;
            Ok(a_norm(&gp.multiply(gj).sub(&gp), q0 + blk.params.eps))
        };
        let (blk, increment, _) = stage_block(&make, eps0, opts, &inc, b)?;
        let gj = blk.g.clone().expect("measure blocks carry g");
        let next = gp.multiply(&gj);
        let rec = MeasureStage {
            stage: j,
            eps: blk.params.eps,
            exponent: q0 + blk.params.eps,
            budget: b,
            increment,
            grid_min: next.sample(g).min_re(),
            block_pass: blk.cert.pass(),
        };
        if !(rec.block_pass && increment < b) {
            return Err(Error::ScheduleViolation { stage: j, increment, budget: b });
        }
        gp = next;
        s = s.multiply(&blk.f);
        k = k.and(&blk.k);
        nu_prev = blk.params.nu;
        ledger.push(rec);
        blocks.push(blk);
    }
    let g0_deviation = (gp.coeff(0) - C64::new(1.0, 0.0)).norm();
    Ok(MeasureState { q0, grid: g, g_product: gp, s, k, blocks, ledger, g0_deviation })
}

pub fn measure_certificate(state: &MeasureState) -> Result<Certificate> {
    let mut cert = Certificate::new("measure_pipeline");
    for r in &state.ledger {
        cert.check(format!("stage {} increment in A_{}", r.stage, r.exponent), r.increment, "<", r.budget);
        cert.check(format!("stage {} grid min of G", r.stage), r.grid_min, ">=", -1e-9);
    }
    cert.check("|G_J^(0) - 1|", state.g0_deviation, "<", 1.0);
    let gs = state.g_product.sample(state.grid);
    cert.check("grid points of supp G_J outside K", support_violations(&gs, &state.k) as f64, "<=", 0.0);
    let params = CertParams {
        nus: state.blocks.iter().map(|b| b.params.nu).collect(),
        eps: state.blocks.iter().map(|b| b.params.eps).collect(),
        p: state.q0 / (state.q0 - 1.0),
        orlicz: Vec::new(),
    };
    let xs: Vec<TrigPoly> = state.blocks.iter().map(|b| b.x.clone()).collect();
    let nm = verify_certificate(CertKind::NomeasureLq, &state.k, &xs, &params)?;
    cert.absorb("nomeasure_lq", &nm);
    cert.digest = digest(&[&state.g_product, &state.s], &[&state.k]);
    Ok(cert)
}

/// `||1 - P g||` in coefficient `l_p`.
pub fn inverse_residual(g: &TrigPoly, p_poly: &TrigPoly, p: f64) -> f64 {
    a_norm(&TrigPoly::constant(1.0).sub(&p_poly.multiply(g)), p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NearInverse {
    pub p_poly: TrigPoly,
    pub residual: f64,
    pub degree: usize,
    pub converged: bool,
}

fn truncate(a: &TrigPoly, d: usize) -> TrigPoly {
    let d = d as i64;
    TrigPoly::from_terms(a.terms().iter().filter(|t| t.0.abs() <= d).copied())
}

/// `conj(a^(-n))` at `n`, so that multiplying by it is the adjoint of
/// multiplying by `a`.
fn adjoint(a: &TrigPoly) -> TrigPoly {
    TrigPoly::from_terms(a.terms().iter().map(|&(n, c)| (-n, c.conj())))
}

fn weighted(w: &[(i64, f64)], r: &TrigPoly) -> TrigPoly {
    TrigPoly::from_terms(r.terms().iter().map(|&(n, c)| {
        let wi = w.binary_search_by_key(&n, |e| e.0).map(|i| w[i].1).unwrap_or(1.0);
        (n, c * wi)
    }))
}

/// `P` of degree `<= d` (default `4 deg g`) approximately minimizing
/// `||1 - P g||_{l_p}`: Neumann partial sums as warm start, then
/// iteratively reweighted least squares solved by conjugate gradients.
pub fn near_inverse(g: &TrigPoly, d: Option<usize>, target: f64, p: f64) -> Result<NearInverse> {
    if g.is_empty() {
        return Err(Error::Invalid("g must be non-zero".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::Invalid("p must be at least 1".into()));
    }
    let d = d.unwrap_or(4 * g.degree() as usize).max(0);
    let g0 = g.coeff(0);
    let mut best = TrigPoly::zero();
    let mut best_res = inverse_residual(g, &best, p);
    if g0.norm() > 0.0 {
        // g = g0 (1 - u)
        let u = TrigPoly::constant(1.0).sub(&g.scale(g0.inv()));
        let mut term = TrigPoly::constant(1.0);
        let mut sum = TrigPoly::zero();
        for _ in 0..=d.max(1) {
            sum = sum.add(&truncate(&term, d));
            let cand = sum.scale(g0.inv());
            let res = inverse_residual(g, &cand, p);
            if res < best_res {
                best = cand;
                best_res = res;
            }
            term = truncate(&term.multiply(&u), 2 * d + g.degree() as usize);
            if term.is_empty() {
                break;
            }
        }
    }
    let ga = adjoint(g);
    let one = TrigPoly::constant(1.0);
    let mut c = best.clone();
    for _ in 0..60 {
        if best_res <= 1e-15 {
            break;
        }
        let r = one.sub(&c.multiply(g));
        let floor = 1e-14 * r.terms().iter().map(|t| t.1.norm()).fold(0.0, f64::max).max(1e-300);
        let w: Vec<(i64, f64)> = r.terms().iter().map(|&(n, v)| (n, v.norm().max(floor).powf(p - 2.0))).collect();
        // normal equations A^H W A c = A^H W e_0, by CG from c
        let apply = |x: &TrigPoly| truncate(&weighted(&w, &x.multiply(g)).multiply(&ga), d);
        let wone = weighted(&w, &one);
        let rhs = truncate(&wone.multiply(&ga), d);
        let mut x = c.clone();
        let mut res = rhs.sub(&apply(&x));
        let mut dir = res.clone();
        let mut rr: f64 = res.energy();
        let r0 = rr;
        for _ in 0..200 {
            if rr <= 1e-28 * r0.max(1e-300) {
                break;
            }
            let ad = apply(&dir);
            let denom: f64 = dir.terms().iter().map(|&(n, v)| (v.conj() * ad.coeff(n)).re).sum();
            if !(denom > 0.0) {
                break;
            }
            let alpha = rr / denom;
            x = x.add(&dir.scale_re(alpha));
            res = res.sub(&ad.scale_re(alpha));
            let rr_new = res.energy();
            dir = res.add(&dir.scale_re(rr_new / rr));
            rr = rr_new;
        }
        let val = inverse_residual(g, &x, p);
        let improved = val < best_res * (1.0 - 1e-12);
        c = x;
        if val < best_res {
            best = c.clone();
            best_res = val;
        }
        if !improved {
            break;
        }
    }
    Ok(NearInverse { p_poly: best, residual: best_res, degree: d, converged: best_res <= target })
}

/// Kernel table on `[x0, x0 + (len-1) step]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub x0: f64,
    /// Samples per unit length.
    pub per_unit: usize,
    pub values: Vec<f64>,
}

impl Kernel {
    /// `exp(-x^2/2)` on `[-32, 32]` with 64 samples per unit.
    pub fn gaussian() -> Self {
        let per_unit = 64;
        let values = (0..=64 * per_unit).map(|i| {
            let x = -32.0 + i as f64 / per_unit as f64;
            (-0.5 * x * x).exp()
        });
        Self { x0: -32.0, per_unit, values: values.collect() }
    }

    fn step(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    /// Value at lattice index `i` (relative to `x0`), zero outside.
    fn at(&self, i: i64) -> f64 {
        if i < 0 {
            0.0
        } else {
            self.values.get(i as usize).copied().unwrap_or(0.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferReport {
    pub x: Vec<f64>,
    pub values: Vec<C64>,
    pub lp_norm: f64,
    pub a_p_norm: f64,
    pub m_const: f64,
    pub bound_holds: bool,
    /// Max `|(Tf)^(t) - gamma^(t) f(t)|` over the spot checks.
    pub transform_error: f64,
}

/// `(Tf)(x) = sum_n f^(n) gamma(x + n)` on the kernel lattice.
pub fn transfer_to_line(f: &TrigPoly, gamma: &Kernel, p: f64) -> Result<TransferReport> {
    let u = gamma.per_unit as i64;
    let mass: f64 = gamma.values.iter().map(|v| v.abs()).sum::<f64>() * gamma.step();
    let edge = gamma.per_unit.min(gamma.values.len());
    let tail: f64 = gamma.values[..edge].iter().chain(&gamma.values[gamma.values.len() - edge..]).map(|v| v.abs()).sum::<f64>()
        * gamma.step();
    if tail > 1e-9 * mass {
        return Err(Error::KernelTruncation(tail / mass));
    }
    if gamma.x0.fract() != 0.0 {
        return Err(Error::Invalid("kernel table must start at an integer".into()));
    }
    let x0 = gamma.x0 as i64 * u;
    let len = gamma.values.len() as i64;
    let (nmin, nmax) = (
        f.terms().first().map_or(0, |t| t.0),
        f.terms().last().map_or(0, |t| t.0),
    );
    // x + n inside the table for some stored n
    let (imin, imax) = (x0 - nmax * u, x0 + len - 1 - nmin * u);
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for i in imin..=imax {
        let mut v = C64::new(0.0, 0.0);
        for &(n, c) in f.terms() {
            v += c * gamma.at(i + n * u - x0);
        }
        xs.push(i as f64 / u as f64);
        vals.push(v);
    }
    let step = gamma.step();
    let lp_norm = (vals.iter().map(|v| v.norm().powf(p)).sum::<f64>() * step).powf(1.0 / p);
    let a_p_norm = a_norm(f, p);
    let mut sup = 0.0f64;
    for r in 0..u {
        let s: f64 = (0..len).filter(|j| (j + x0 - r).rem_euclid(u) == 0).map(|j| gamma.values[j as usize].abs()).sum();
        sup = sup.max(s);
    }
    let m_const = sup.max(mass);
    let mut transform_error = 0.0f64;
    for k in 0..16 {
        let t = -std::f64::consts::PI + (k as f64 + 0.5) * std::f64::consts::PI / 8.0;
        let lhs: C64 = xs.iter().zip(&vals).map(|(&x, v)| v * C64::from_polar(step, -x * t)).sum();
        let ghat: C64 = gamma
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| C64::from_polar(v * step, -(gamma.x0 + j as f64 * step) * t))
            .sum();
        let ft: C64 = f.terms().iter().map(|&(n, c)| c * C64::from_polar(1.0, n as f64 * t)).sum();
        transform_error = transform_error.max((lhs - ghat * ft).norm());
    }
    Ok(TransferReport {
        x: xs,
        values: vals,
        lp_norm,
        a_p_norm,
        m_const,
        bound_holds: lp_norm <= m_const * a_p_norm * (1.0 + 1e-12),
        transform_error,
    })
}

/// Value-domain approximation of `g` for the generator scheme: node values
/// clamped to `0.999 r` in modulus, interpolated, then shrunk until the sup
/// on a doubled grid is at most `r`.
pub fn clamp_approx(g: &TrigPoly, grid: usize, r: f64) -> Result<TrigPoly> {
    let s = g.sample(grid);
    let cl: Vec<C64> = s
        .samples()
        .iter()
        .map(|v| if v.norm() > 0.999 * r { v * (0.999 * r / v.norm()) } else { *v })
        .collect();
    let mut h = GridFunction::new(cl)?.interpolant();
    let sup = h.sample(2 * grid).max_abs();
    if sup > r {
        h = h.scale_re(r / sup);
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorStage {
    pub n: usize,
    pub eps: f64,
    /// Properties `1_n .. 6_n` as clauses (1 and 2 for `n = 0`).
    pub cert: Certificate,
}

#[derive(Clone, Debug)]
pub struct GeneratorLedger {
    pub p: f64,
    pub grid: usize,
    pub stages: Vec<GeneratorStage>,
    pub f: TrigPoly,
    pub g: TrigPoly,
    pub p_poly: TrigPoly,
    pub supp: GridMask,
    pub final_residual: f64,
}

fn supp_mask(f: &TrigPoly, grid: usize) -> GridMask {
    let s = f.sample(grid);
    GridMask::new(s.samples().iter().map(|v| v.norm() > crate::principal::SUPPORT_TOL).collect())
}

fn max_on(vals: &GridFunction, mask: &GridMask) -> f64 {
    vals.samples().iter().zip(mask.bits()).filter(|(_, &m)| m).map(|(v, _)| v.norm()).fold(0.0, f64::max)
}

/// Successive approximation `f_{n+1} = f_n F`, `g_{n+1} = g_n - h X` with a
/// near inverse `P_{n+1}` of `g_{n+1}`; properties re-verified per stage.
pub fn run_generator_scheme(p: f64, stages: usize, grid: Option<usize>) -> Result<GeneratorLedger> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Invalid("p must lie in (1, 2)".into()));
    }
    if stages > 4 {
        return Err(Error::Invalid("J must be at most 4".into()));
    }
    let q = p / (p - 1.0);
    let gsz = grid.unwrap_or(PIPELINE_GRID);
    let one = TrigPoly::constant(1.0);
    let (mut f, mut g, mut pp) = (one.clone(), one.clone(), one.clone());
    let mut supp = GridMask::full(gsz);
    let mut p_sum = 1.0;
    let mut c0 = Certificate::new("generator_stage_0");
    c0.check("1_0: max |g_0| on supp f_0", 1.0, "<=", 1.0);
    c0.check("2_0: ||1 - P_0 g_0||_A_p", 0.0, "<", 0.5);
    let mut out = vec![GeneratorStage { n: 0, eps: 0.0, cert: c0 }];
    let mut residual = 0.0;
    for n in 0..stages {
        let rate = 0.99f64.powi(n as i32);
        let h = clamp_approx(&g, gsz, rate)?;
        let h_a = a_norm(&h, 1.0);
        let f_a = a_norm(&f, 1.0);
        let b = 2f64.powi(-(n as i32) - 2);
        let eps = (b / ((1.0 + p_sum) * h_a)).min(b / f_a).min(0.99);
        let opts = SearchOptions { grid: Some(gsz), nu_floor: 3 };
        let outcome = principal_search_with(&PrincipalVariant::Generators { eps, p }, opts)?;
        let blk = outcome.best.ok_or_else(|| {
            Error::SearchExhausted(format!(
                "stage {}: no generator block for eps = {eps:.3e} within nu^N <= {}",
                n + 1,
                crate::principal::MAX_NU_POW
            ))
        })?;
        let fi = f.multiply(&blk.f);
        let gi = g.sub(&h.multiply(&blk.x));
        let inv = near_inverse(&gi, None, 2f64.powi(-(n as i32) - 2), p)?;
        let supp_i = supp_mask(&fi, gsz);
        let mut c = Certificate::new(format!("generator_stage_{}", n + 1));
        let gs = g.sample(gsz);
        let hs = h.sample(gsz);
        let dev = gs.samples().iter().zip(hs.samples()).zip(supp.bits()).filter(|(_, &m)| m).map(|((a, b), _)| (a - b).norm()).fold(0.0, f64::max);
        c.check("max |g_n - h| on supp f_n", dev, "<", 0.01 * rate);
        let rate1 = rate * 0.99;
        c.check(format!("1_{}: max |g| on supp f", n + 1), max_on(&gi.sample(gsz), &supp_i), "<=", rate1);
        c.check(format!("2_{}: ||1 - P g||_A_p", n + 1), inv.residual, "<", 2f64.powi(-(n as i32) - 2));
        let fine = grid_size(gi.degree().max(g.degree())).unwrap_or(gsz).max(gsz);
        c.check(format!("3_{}: ||g_n - g_(n+1)||_inf", n + 1), g.sub(&gi).sample(fine).max_abs(), "<=", rate);
        c.check(format!("4_{}: ||g_n - g_(n+1)||_A_p", n + 1), a_norm(&g.sub(&gi), p), "<", 2f64.powi(-(n as i32) - 2) / (1.0 + p_sum));
        c.check(format!("5_{}: ||f_n - f_(n+1)||_A_q", n + 1), a_norm(&f.sub(&fi), q), "<", 2f64.powi(-(n as i32) - 2));
        c.check(format!("6_{}: supp f_(n+1) inside supp f_n", n + 1), (!supp_i.is_subset_of(&supp)) as u8 as f64, "<=", 0.0);
        c.absorb("block", &blk.cert);
        c.digest = digest(&[&fi, &gi, &inv.p_poly], &[&supp_i]);
        out.push(GeneratorStage { n: n + 1, eps, cert: c });
        p_sum += a_norm(&inv.p_poly, 1.0);
        residual = inv.residual;
        f = fi;
        g = gi;
        pp = inv.p_poly;
        supp = supp_i;
    }
    Ok(GeneratorLedger { p, grid: gsz, stages: out, f, g, p_poly: pp, supp, final_residual: residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stages_is_identity() {
        let st = run_iteration(&IterVariant::Lq { q: 4.0 }, 0, EpsRule::Wiener, Some(1 << 10)).unwrap();
        assert_eq!(st.s, TrigPoly::constant(1.0));
        assert!(st.ledger.is_empty());
        assert_eq!(st.distance_from_one, 0.0);
    }

    #[test]
    fn neumann_oracle() {
        let g = TrigPoly::constant(1.0).sub(&TrigPoly::monomial(1, C64::new(0.4, 0.0)));
        for d in [1usize, 3, 6] {
            let inv = near_inverse(&g, Some(d), 0.0, 1.5).unwrap();
            assert!(inv.residual <= 0.4f64.powi(d as i32 + 1) * (1.0 + 1e-12));
        }
        let inv = near_inverse(&TrigPoly::constant(1.0), None, 1e-12, 1.5).unwrap();
        assert!(inv.residual < 1e-15 && inv.converged);
    }

    #[test]
    fn dilated_mask_nodes() {
        let e = GridMask::new((0..16).map(|i| i % 4 == 1).collect());
        let e3 = dilate_mask(&e, 3);
        for i in 0..16 {
            assert_eq!(e3.bits()[i], e.bits()[(3 * i) % 16]);
        }
    }

    #[test]
    fn transfer_of_cosine() {
        let k = Kernel::gaussian();
        let f = TrigPoly::cosine(1);
        let rep = transfer_to_line(&f, &k, 1.5).unwrap();
        let gauss = |x: f64| (-0.5 * x * x).exp();
        for (x, v) in rep.x.iter().zip(&rep.values).step_by(7) {
            let want = 0.5 * (gauss(x + 1.0) + gauss(x - 1.0));
            assert!((v.re - want).abs() < 1e-14 && v.im.abs() < 1e-14, "{x} {} {want}", v.re);
        }
        assert!(rep.bound_holds);
        assert!(rep.transform_error < 1e-10, "{}", rep.transform_error);
    }
}
