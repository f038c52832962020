//! Dispatch of a validated [`RunConfig`] to the core builders.

use crate::config::{parse_phi, phi_label, RunConfig};
use crate::report::{certificate_json, num, to_string, value_f64, write_atomic};
use anyhow::{anyhow, Context};
use psf_core::cert::Certificate;
use psf_core::kahane::auto_moment_killer;
use psf_core::norms::{besicovitch_dimension, orlicz_checks};
use psf_core::pipeline::{
    iteration_certificate, run_generator_scheme, run_iteration_lenient, shrink, EpsRule, IterVariant, StageBlock,
};
use psf_core::principal::{
    build_auxiliary_phi, principal_search_with, BlockClaims, BlockNorm, LevelRule, PrincipalOutput, PrincipalVariant,
    SearchOptions,
};
use psf_core::riesz::{concentration_report_lacunary, min_nu, BoundRule, RieszSpec};
use psf_core::{GridMask, TrigPoly};
use serde_json::{json, Map, Value};
use std::path::Path;

/// Result of one command before it is wrapped into the run report.
pub struct Outcome {
    pub certificates: Vec<Certificate>,
    pub results: Value,
    /// Extra failure not expressed as a clause, such as a verify mismatch.
    pub mismatch: bool,
}

impl Outcome {
    fn new(certificates: Vec<Certificate>, results: Value) -> Self {
        Self { certificates, results, mismatch: false }
    }

    pub fn pass(&self) -> bool {
        !self.mismatch && !self.certificates.is_empty() && self.certificates.iter().all(|c| c.pass())
    }
}

pub fn dispatch(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    match cfg.command.as_str() {
        "construct" => construct(cfg),
        "verify" => verify(cfg),
        "kahane" => kahane(cfg),
        "concentration" => concentration(cfg),
        "auxiliary" => auxiliary(cfg),
        "generator" => generator(cfg),
        "shrink" => shrink_cmd(cfg),
        "orlicz-check" => orlicz_check(cfg),
        "dimension" => dimension(cfg),
        other => Err(anyhow!("unknown command {other}")),
    }
}

fn iter_variant(name: &str, q: Option<f64>, phi: &str) -> anyhow::Result<IterVariant> {
    Ok(match name {
        "lq" => IterVariant::Lq { q: q.ok_or_else(|| anyhow!("lq needs q"))? },
        "c0" => IterVariant::C0,
        "orlicz" => IterVariant::Orlicz { phi: parse_phi(phi)? },
        other => return Err(anyhow!("construct does not support variant {other}")),
    })
}

fn rule_json(r: &LevelRule) -> Value {
    match *r {
        LevelRule::Band { lo, hi } => json!({"kind": "band", "lo": num(lo), "hi": num(hi)}),
        LevelRule::Near { center, radius } => json!({"kind": "near", "center": num(center), "radius": num(radius)}),
        LevelRule::Above { lo } => json!({"kind": "above", "lo": num(lo)}),
        LevelRule::AtLeast { lo } => json!({"kind": "at_least", "lo": num(lo)}),
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn claims_json(c: &BlockClaims) -> Value {
    let norm = match &c.norm {
        BlockNorm::Max => json!({"kind": "max"}),
        BlockNorm::Lq(q) => json!({"kind": "lq", "q": num(*q)}),
        BlockNorm::Orlicz(phi) => json!({"kind": "orlicz", "phi": phi_label(phi)}),
    };
    json!({
        "norm": norm,
        "eps": num(c.eps),
        "rule": rule_json(&c.rule),
        "nu": c.nu,
        "x_lp": opt(c.x_lp),
        "x_helson": opt(c.x_helson),
        "g_exponent": opt(c.g_exponent),
        "x_spectrum": c.x_spectrum,
    })
}

fn field(v: &Value, key: &str) -> anyhow::Result<f64> {
    value_f64(&v[key]).ok_or_else(|| anyhow!("ledger field '{key}' missing or not a number"))
}

fn opt_field(v: &Value, key: &str) -> Option<f64> {
    value_f64(&v[key])
}

fn claims_from_json(v: &Value) -> anyhow::Result<BlockClaims> {
    let n = &v["norm"];
    let norm = match n["kind"].as_str() {
        Some("max") => BlockNorm::Max,
        Some("lq") => BlockNorm::Lq(field(n, "q")?),
        Some("orlicz") => BlockNorm::Orlicz(parse_phi(n["phi"].as_str().unwrap_or(""))?),
        _ => return Err(anyhow!("bad norm in claims")),
    };
    let r = &v["rule"];
    let rule = match r["kind"].as_str() {
        Some("band") => LevelRule::Band { lo: field(r, "lo")?, hi: field(r, "hi")? },
        Some("near") => LevelRule::Near { center: field(r, "center")?, radius: field(r, "radius")? },
        Some("above") => LevelRule::Above { lo: field(r, "lo")? },
        Some("at_least") => LevelRule::AtLeast { lo: field(r, "lo")? },
        _ => return Err(anyhow!("bad level rule in claims")),
    };
    Ok(BlockClaims {
        norm,
        eps: field(v, "eps")?,
        rule,
        nu: v["nu"].as_u64().ok_or_else(|| anyhow!("claims nu missing"))?,
        x_lp: opt_field(v, "x_lp"),
        x_helson: opt_field(v, "x_helson"),
        g_exponent: opt_field(v, "g_exponent"),
        x_spectrum: v["x_spectrum"].as_bool().unwrap_or(false),
    })
}

fn block_params(b: &PrincipalOutput) -> Value {
    let p = &b.params;
    json!({
        "variant": p.variant,
        "eps": num(p.eps),
        "n": p.n,
        "nu": p.nu,
        "delta": num(p.delta),
        "r": opt(p.r),
        "eta": opt(p.eta),
        "grid": p.grid,
        "mollifier_reach": p.mollifier_reach,
        "atoms": p.atoms,
        "rho_total_variation": num(p.rho_total_variation),
        "restriction_l2": num(p.restriction_l2),
    })
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn construct(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let variant = iter_variant(cfg.text("variant"), cfg.float("q"), cfg.text("phi"))?;
    let rule = if cfg.text("eps_rule") == "budget" { EpsRule::Budget } else { EpsRule::Wiener };
    let grid = cfg.int("grid").unwrap() as usize;
    let stages = cfg.int("stages").unwrap() as usize;
    let st = run_iteration_lenient(&variant, stages, rule, Some(grid))?;
    let blocks = st.stage_blocks();
    let mut cert = iteration_certificate(&variant, grid, &blocks)?;
    if let Some(h) = &st.halted {
        cert.note(format!("halted: {h}"));
        cert.check("stages completed", blocks.len() as f64, ">=", stages as f64);
    }
    let out = cfg.path("out").unwrap();
    let mut stage_rows = Vec::new();
    for (j, (b, rec)) in st.blocks.iter().zip(&st.ledger).enumerate() {
        let dir = out.join(format!("stage_{}", j + 1));
        write(&dir.join("f.txt"), &b.f.to_dump())?;
        write(&dir.join("x.txt"), &b.x.to_dump())?;
        write(&dir.join("k.txt"), &b.k.to_dump())?;
        if let Some(g) = &b.g {
            write(&dir.join("g.txt"), &g.to_dump())?;
        }
        stage_rows.push(json!({
            "stage": j + 1,
            "eps": num(rec.eps),
            "nu": rec.nu,
            "n": rec.n,
            "r": opt(b.params.r),
            "budget": num(rec.budget),
            "increment": num(rec.increment),
            "wiener": num(rec.wiener),
            "retries": rec.retries,
            "block_pass": rec.block_pass,
            "claims": claims_json(&b.claims),
            "params": block_params(b),
        }));
    }
    write(&out.join("s.txt"), &st.s.to_dump())?;
    write(&out.join("k.txt"), &st.k.to_dump())?;
    let ledger = json!({
        "variant": cfg.text("variant"),
        "q": opt(cfg.float("q")),
        "phi": if cfg.text("variant") == "orlicz" { Value::from(cfg.text("phi")) } else { Value::Null },
        "grid": grid,
        "eps_rule": cfg.text("eps_rule"),
        "planned_stages": stages,
        "stages": stage_rows,
        "distance_from_one": num(st.distance_from_one),
        "halted": st.halted,
    });
    write(&out.join("ledger.json"), &to_string(&ledger))?;
    write(&out.join("certificate.json"), &to_string(&certificate_json(&cert)))?;
    Ok(Outcome::new(vec![cert], json!({ "out": out.display().to_string(), "ledger": ledger })))
}

/// Clause values of a stored certificate, keyed by description.
fn stored_clauses(v: &Value) -> Vec<(String, Option<f64>)> {
    v["clauses"]
        .as_array()
        .map(|a| a.iter().map(|c| (c["description"].as_str().unwrap_or("").to_string(), value_f64(&c["lhs"]))).collect())
        .unwrap_or_default()
}

fn verify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let dir = cfg.path("dir").unwrap();
    let ledger: Value = serde_json::from_str(&read(&dir.join("ledger.json"))?).context("ledger.json")?;
    let variant = iter_variant(
        ledger["variant"].as_str().unwrap_or(""),
        opt_field(&ledger, "q"),
        ledger["phi"].as_str().unwrap_or(""),
    )?;
    let grid = ledger["grid"].as_u64().ok_or_else(|| anyhow!("ledger grid missing"))? as usize;
    let mut blocks = Vec::new();
    for (j, row) in ledger["stages"].as_array().cloned().unwrap_or_default().iter().enumerate() {
        let sd = dir.join(format!("stage_{}", j + 1));
        let g = sd.join("g.txt");
        blocks.push(StageBlock {
            f: TrigPoly::from_dump(&read(&sd.join("f.txt"))?)?,
            x: TrigPoly::from_dump(&read(&sd.join("x.txt"))?)?,
            k: GridMask::from_dump(&read(&sd.join("k.txt"))?)?,
            g: if g.exists() { Some(TrigPoly::from_dump(&read(&g)?)?) } else { None },
            claims: claims_from_json(&row["claims"])?,
            n: row["n"].as_u64().unwrap_or(0) as usize,
            r: opt_field(row, "r"),
        });
    }
    let mut cert = iteration_certificate(&variant, grid, &blocks)?;
    let stored: Value = serde_json::from_str(&read(&dir.join("certificate.json"))?).context("certificate.json")?;
    let halted = ledger["halted"].as_str().map(str::to_string);
    if let Some(h) = &halted {
        cert.note(format!("halted: {h}"));
        let planned = ledger["planned_stages"].as_u64().unwrap_or(0) as f64;
        cert.check("stages completed", blocks.len() as f64, ">=", planned);
    }
    let old = stored_clauses(&stored);
    let new: Vec<(String, Option<f64>)> = cert.clauses.iter().map(|c| (c.description.clone(), Some(c.lhs))).collect();
    let same = old.len() == new.len()
        && old.iter().zip(&new).all(|(a, b)| a.0 == b.0 && a.1.map(f64::to_bits) == b.1.map(f64::to_bits));
    let digest_same = stored["digest"].as_str() == Some(cert.digest.as_str());
    write(&dir.join("verify.json"), &to_string(&certificate_json(&cert)))?;
    let mut o = Outcome::new(
        vec![cert],
        json!({ "dir": dir.display().to_string(), "matches_stored": same, "digest_matches": digest_same }),
    );
    o.mismatch = !(same && digest_same);
    Ok(o)
}

fn kahane(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let iv = cfg.list("interval").unwrap();
    let delta = cfg.float("delta").unwrap();
    let m = auto_moment_killer((iv[0], iv[1]), delta, cfg.int("atoms").unwrap() as usize)?;
    let mut cert = Certificate::new("kahane");
    for k in 1..=m.k_max() {
        cert.check(format!("|moment {k}|"), m.moment(k).abs(), "<", delta);
    }
    cert.check(format!("tail bound beyond k = {}", m.k_max()), m.tail_bound(), "<", delta);
    cert.check("|sum c - 1|", m.mass_error().abs(), "<=", 1e-10);
    let moments: Vec<Value> = (1..=m.k_max()).map(|k| json!({"k": k, "moment": num(m.moment(k))})).collect();
    let atoms: Vec<Value> = m.atoms().iter().map(|&(s, c)| json!({"s": num(s), "c": num(c)})).collect();
    if let Some(out) = cfg.path("out") {
        write(&out.join("measure.txt"), &m.to_dump())?;
    }
    Ok(Outcome::new(
        vec![cert],
        json!({
            "atoms": atoms,
            "k_max": m.k_max(),
            "moments": moments,
            "total_variation": num(m.total_variation()),
            "tail_bound": num(m.tail_bound()),
            "min_weight": num(m.min_weight()),
            "signed": m.min_weight() < 0.0,
        }),
    ))
}

fn concentration(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let n = cfg.int("n").unwrap() as usize;
    let variant = cfg.text("variant");
    let q = cfg.float("q").unwrap_or(f64::INFINITY);
    let cos = TrigPoly::cosine(1);
    let nu = match cfg.int("nu") {
        Some(nu) => nu,
        None => min_nu(n, &cos, q, 0.01)?,
    };
    let alphas = cfg.list("alphas").unwrap();
    let mut cert = Certificate::new("concentration");
    let mut rows = Vec::new();
    for &s in cfg.list("s").unwrap() {
        let (spec, rule) = match variant {
            "lq" => (RieszSpec::lq(q, nu, n, s), BoundRule::Lq { q, n }),
            "c0" => (RieszSpec::c0(nu, n, s), BoundRule::Hoeffding { m: 1.0, n }),
            "orlicz" => {
                let r = cfg.float("r").unwrap();
                (RieszSpec::orlicz(r, nu, n, s), BoundRule::Orlicz { n, r })
            }
            _ => (RieszSpec::generators(cos.clone(), nu, n, s), BoundRule::Generators { n }),
        };
        let rep = concentration_report_lacunary(&spec, s, alphas, rule)?;
        for r in &rep.rows {
            cert.check(format!("s = {s}, alpha = {}: tail", r.alpha), r.empirical, "<=", r.bound);
            rows.push(json!({"s": num(s), "alpha": num(r.alpha), "empirical": num(r.empirical), "bound": num(r.bound)}));
        }
    }
    Ok(Outcome::new(vec![cert], json!({ "nu": nu, "n": n, "rows": rows })))
}

fn auxiliary(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let a = build_auxiliary_phi(cfg.float("eta").unwrap(), cfg.float("p").unwrap())?;
    let mut cert = Certificate::new("auxiliary");
    cert.check("||phi||_inf", a.sup, "<", 1.0);
    cert.check("||phi||_L2", a.l2, ">", 0.9);
    cert.check("|phi^(0)|", a.mean.abs(), "<=", 1e-12);
    if let Some(out) = cfg.path("out") {
        write(&out.join("phi.txt"), &a.phi.to_dump())?;
    }
    Ok(Outcome::new(
        vec![cert],
        json!({
            "eta": num(a.eta), "p": num(a.p), "m": a.m, "nu": a.nu, "degree": a.phi.degree(),
            "sup": num(a.sup), "l2": num(a.l2), "mean": num(a.mean),
            "a_p": num(a.a_p), "a_q": num(a.a_q),
            "eta_a_p": num(a.eta * a.a_p), "a_q_over_eta": num(a.a_q / a.eta),
        }),
    ))
}

fn generator(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let led = run_generator_scheme(cfg.float("p").unwrap(), cfg.int("stages").unwrap() as usize, cfg.int("grid").map(|g| g as usize))?;
    if let Some(out) = cfg.path("out") {
        write(&out.join("f.txt"), &led.f.to_dump())?;
        write(&out.join("g.txt"), &led.g.to_dump())?;
        write(&out.join("p.txt"), &led.p_poly.to_dump())?;
    }
    let eps: Vec<Value> = led.stages.iter().map(|s| num(s.eps)).collect();
    Ok(Outcome::new(
        led.stages.iter().map(|s| s.cert.clone()).collect(),
        json!({ "eps": eps, "final_residual": num(led.final_residual) }),
    ))
}

fn lq_block(eps: f64, q: f64, grid: usize, floor: u64) -> anyhow::Result<PrincipalOutput> {
    let o = principal_search_with(&PrincipalVariant::Lq { eps, q }, SearchOptions { grid: Some(grid), nu_floor: floor })?;
    o.best.ok_or_else(|| anyhow!(psf_core::Error::SearchExhausted(format!("no lq block at eps = {eps}"))))
}

/// `S` is the product of two lq blocks with increasing `nu`; the third
/// block is the one that gets dilated.
fn shrink_cmd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (q, eps, grid) = (cfg.float("q").unwrap(), cfg.float("eps").unwrap(), cfg.int("grid").unwrap() as usize);
    let b1 = lq_block(eps, q, grid, 3)?;
    let b2 = lq_block(eps, q, grid, b1.params.nu + 1)?;
    let s = b1.f.multiply(&b2.f);
    let k = b1.k.and(&b2.k);
    let blk = lq_block(eps, q, grid, 3)?;
    let limit = psf_core::norms::a_norm(&s, q) * psf_core::norms::a_norm(&blk.f.sub(&TrigPoly::constant(1.0)), q);
    let target = cfg.float("target").unwrap_or(1.05 * limit);
    let r = shrink(&s, &k, &blk, q, target, cfg.int("m_cap"))?;
    let mut cert = Certificate::new("shrink");
    cert.check("||S_1 - S||_A_q", r.distance, "<", target);
    cert.check("K_1 inside K", (!r.k1.is_subset_of(&k)) as u8 as f64, "<=", 0.0);
    cert.check(
        "grid points of supp S_1 outside K_1",
        psf_core::principal::support_violations(&r.s1.sample(grid), &r.k1) as f64,
        "<=",
        0.0,
    );
    if let Some(out) = cfg.path("out") {
        write(&out.join("s1.txt"), &r.s1.to_dump())?;
        write(&out.join("k1.txt"), &r.k1.to_dump())?;
    }
    let trail: Vec<Value> = r.trail.iter().map(|&(m, d)| json!([m, num(d)])).collect();
    Ok(Outcome::new(vec![cert], json!({ "m": r.m, "target": num(target), "limit": num(r.limit), "trail": trail })))
}

fn orlicz_check(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let phi = cfg.phi()?;
    let rep = orlicz_checks(&phi, cfg.list("t").unwrap())?;
    let mut cert = Certificate::new("orlicz_check");
    cert.check("sup phi(2t)/phi(t) on samples", rep.delta2_ratio_sup, "<", f64::INFINITY);
    cert.check("sup phi(st)/(phi(s)phi(t)) on samples", rep.submult_constant_m, "<", f64::INFINITY);
    cert.note("sampled evidence only");
    let nr: Vec<Value> = rep.n_of_r.iter().map(|&(r, n)| json!({"r": num(r), "n": n})).collect();
    Ok(Outcome::new(
        vec![cert],
        json!({
            "phi": cfg.text("phi"),
            "delta2_ratio_sup": num(rep.delta2_ratio_sup),
            "submult_constant_m": num(rep.submult_constant_m),
            "n_of_r": nr,
        }),
    ))
}

fn dimension(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let g = cfg.float("gamma").unwrap();
    let d = besicovitch_dimension(g)?;
    let mut cert = Certificate::new("dimension");
    cert.check("dimension", d, "<=", 1.0);
    Ok(Outcome::new(vec![cert], json!({ "gamma": num(g), "dimension": num(d) })))
}

pub fn report(cfg: &RunConfig, o: &Outcome, seconds: f64) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), Value::from(cfg.command.clone()));
    m.insert("config".into(), cfg.to_json());
    m.insert("certificates".into(), Value::Array(o.certificates.iter().map(certificate_json).collect()));
    m.insert("results".into(), o.results.clone());
    m.insert("wall_clock_s".into(), num(seconds));
    m.insert("pass".into(), Value::from(o.pass()));
    Value::Object(m)
}
