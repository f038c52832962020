mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use config::{parse_config, ConfigError};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "psf", version, about = "Riesz-product constructions with checkable certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-stage product iteration with stage dumps and a ledger
    Construct(Flags),
    /// Recompute the certificate of a `construct` output directory
    Verify(Flags),
    /// Signed atomic measure with small moments on an interval
    Kahane(Flags),
    /// Tail table of X under the Riesz product
    Concentration(Flags),
    /// Auxiliary polynomial for the generator scheme
    Auxiliary(Flags),
    /// Successive approximation scheme with near inverses
    Generator(Flags),
    /// Dilate a block until it perturbs a partial product by less than eps
    Shrink(Flags),
    /// Sampled growth checks for an Orlicz function
    OrliczCheck(Flags),
    /// Dimension of the Besicovitch set for gamma
    Dimension(Flags),
}

/// Every flag is also a config key (hyphens become underscores).
#[derive(Args, Default)]
struct Flags {
    /// `key = value` lines or a JSON object; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q0: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Overrides PSF_GRID_CAP
    #[arg(long)]
    grid_cap: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `a,b`
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    atoms: Option<String>,
    /// `power:q` or `power_log:q:alpha`
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    t: Option<String>,
    /// wiener or budget
    #[arg(long)]
    eps_rule: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    m_cap: Option<String>,
}

impl Flags {
    fn lines(&self) -> String {
        let pairs = [
            ("variant", &self.variant),
            ("eps", &self.eps),
            ("q", &self.q),
            ("p", &self.p),
            ("q0", &self.q0),
            ("stages", &self.stages),
            ("nu", &self.nu),
            ("n", &self.n),
            ("r", &self.r),
            ("eta", &self.eta),
            ("gamma", &self.gamma),
            ("grid_cap", &self.grid_cap),
            ("grid", &self.grid),
            ("out", &self.out),
            ("dir", &self.dir),
            ("seed", &self.seed),
            ("interval", &self.interval),
            ("delta", &self.delta),
            ("atoms", &self.atoms),
            ("phi", &self.phi),
            ("alphas", &self.alphas),
            ("s", &self.s),
            ("t", &self.t),
            ("eps_rule", &self.eps_rule),
            ("target", &self.target),
            ("m_cap", &self.m_cap),
        ];
        pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| format!("{k} = {v}\n"))).collect()
    }
}

// Exit statuses: 0 every certificate passes, 1 some clause fails, 2 usage
// (clap), 3 config parse, 4 config validation, 5 verify mismatch, 6 I/O,
// 10.. core errors by kind.
fn core_code(e: &psf_core::Error) -> u8 {
    use psf_core::Error::*;
    match e {
        GridTooSmall { .. } => 10,
        GridNotPow2(_) => 11,
        GridCap { .. } => 12,
        Invalid(_) => 13,
        Collision(_) => 14,
        Infeasible { .. } => 15,
        AtomOutOfRange(_) => 16,
        NotDensity(_) => 17,
        DegenerateOrlicz(_) => 18,
        SearchExhausted(_) => 19,
        ScheduleViolation { .. } => 20,
        NearInverse { .. } => 21,
        KernelTruncation(_) => 22,
        Parse(_) => 23,
    }
}

fn error_code(e: &anyhow::Error) -> u8 {
    if let Some(c) = e.downcast_ref::<psf_core::Error>() {
        return core_code(c);
    }
    if let Some(c) = e.downcast_ref::<ConfigError>() {
        return match c {
            ConfigError::Parse { .. } => 3,
            ConfigError::Validation(_) => 4,
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() || e.chain().any(|c| c.is::<std::io::Error>()) {
        return 6;
    }
    1
}

fn run(name: &str, flags: &Flags) -> anyhow::Result<u8> {
    let mut text = match &flags.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let extra = flags.lines();
    if !extra.is_empty() {
        // flags win over file keys
        let (_, file_vals) = config::parse_text(&text)?;
        let (_, flag_vals) = config::parse_text(&extra)?;
        let mut merged = file_vals;
        merged.extend(flag_vals);
        text = merged
            .iter()
            .map(|(k, v)| match v {
                config::Param::Float(x) => format!("{k} = {x:e}\n"),
                config::Param::Int(n) => format!("{k} = {n}\n"),
                config::Param::Text(s) => format!("{k} = {s}\n"),
                config::Param::List(l) => {
                    format!("{k} = {}\n", l.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(","))
                }
            })
            .collect();
    }
    let cfg = parse_config(&text, Some(name))?;
    if let Some(cap) = cfg.int("grid_cap") {
        std::env::set_var("PSF_GRID_CAP", cap.to_string());
    }
    let t = Instant::now();
    let outcome = commands::dispatch(&cfg)?;
    let rep = commands::report(&cfg, &outcome, t.elapsed().as_secs_f64());
    let text = report::to_string(&rep);
    let out = if cfg.command == "verify" { None } else { cfg.path("out") };
    if let Some(out) = out {
        report::write_atomic(&out.join("report.json"), &text)?;
    }
    // a closed pipe downstream is not an error of the run
    let _ = std::io::stdout().write_all(text.as_bytes());
    Ok(if outcome.pass() {
        0
    } else if outcome.mismatch {
        5
    } else {
        1
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match &cli.command {
        Command::Construct(f) => ("construct", f),
        Command::Verify(f) => ("verify", f),
        Command::Kahane(f) => ("kahane", f),
        Command::Concentration(f) => ("concentration", f),
        Command::Auxiliary(f) => ("auxiliary", f),
        Command::Generator(f) => ("generator", f),
        Command::Shrink(f) => ("shrink", f),
        Command::OrliczCheck(f) => ("orlicz-check", f),
        Command::Dimension(f) => ("dimension", f),
    };
    match run(name, flags) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("psf {name}: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
