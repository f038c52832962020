//! Run configuration: `key = value` lines or one JSON object, then
//! per-command defaults and validation.

use psf_core::norms::OrliczFunction;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    Text,
    List,
}

const KEYS: &[(&str, Kind)] = &[
    ("variant", Kind::Text),
    ("eps", Kind::Float),
    ("q", Kind::Float),
    ("p", Kind::Float),
    ("q0", Kind::Float),
    ("stages", Kind::Int),
    ("nu", Kind::Int),
    ("n", Kind::Int),
    ("r", Kind::Float),
    ("eta", Kind::Float),
    ("gamma", Kind::Float),
    ("grid_cap", Kind::Int),
    ("grid", Kind::Int),
    ("out", Kind::Text),
    ("dir", Kind::Text),
    ("seed", Kind::Int),
    ("interval", Kind::List),
    ("delta", Kind::Float),
    ("atoms", Kind::Int),
    ("phi", Kind::Text),
    ("alphas", Kind::List),
    ("s", Kind::List),
    ("t", Kind::List),
    ("eps_rule", Kind::Text),
    ("target", Kind::Float),
    ("m_cap", Kind::Int),
];

pub const COMMANDS: &[&str] =
    &["construct", "verify", "kahane", "concentration", "auxiliary", "generator", "shrink", "orlicz-check", "dimension"];

#[derive(Clone, Debug, PartialEq)]
pub enum Param {
    Float(f64),
    Int(u64),
    Text(String),
    List(Vec<f64>),
}

impl Param {
    pub fn to_json(&self) -> Value {
        match self {
            Param::Float(x) => crate::report::num(*x),
            Param::Int(n) => Value::from(*n),
            Param::Text(s) => Value::from(s.clone()),
            Param::List(v) => Value::Array(v.iter().map(|x| crate::report::num(*x)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, msg: String },
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, msg } => write!(f, "config line {line}: {msg}"),
            ConfigError::Validation(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub values: BTreeMap<String, Param>,
    /// Keys filled from defaults rather than given.
    pub defaulted: Vec<String>,
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|k| k.0 == key).map(|k| k.1)
}

fn parse_value(key: &str, raw: &str, line: usize) -> Result<Param, ConfigError> {
    let kind = kind_of(key).ok_or_else(|| ConfigError::Parse { line, msg: format!("unknown key '{key}'") })?;
    let bad = |what: &str| ConfigError::Parse { line, msg: format!("'{key}' expects {what}, got '{raw}'") };
    let raw = raw.trim();
    Ok(match kind {
        Kind::Float => Param::Float(raw.parse().map_err(|_| bad("a number"))?),
        Kind::Int => Param::Int(raw.parse().map_err(|_| bad("a nonnegative integer"))?),
        Kind::Text => Param::Text(raw.trim_matches('"').to_string()),
        Kind::List => Param::List(
            raw.trim_matches(|c| c == '[' || c == ']')
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("comma-separated numbers"))?,
        ),
    })
}

fn json_value(key: &str, v: &Value) -> Result<Param, ConfigError> {
    let raw = match v {
        Value::Array(a) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    parse_value(key, &raw, 1)
}

/// Reads raw key/value pairs without defaults; the command may be given as
/// a `command` key.
pub fn parse_text(text: &str) -> Result<(Option<String>, BTreeMap<String, Param>), ConfigError> {
    let mut values = BTreeMap::new();
    let mut command = None;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let doc: Map<String, Value> = serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse { line: e.line(), msg: e.to_string() })?;
        for (k, v) in &doc {
            if k == "command" {
                command = v.as_str().map(str::to_string);
                continue;
            }
            values.insert(k.clone(), json_value(k, v)?);
        }
        return Ok((command, values));
    }
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line: i + 1, msg: "expected 'key = value'".into() })?;
        let k = k.trim().replace('-', "_");
        if k == "command" {
            command = Some(v.trim().to_string());
            continue;
        }
        if values.insert(k.clone(), parse_value(&k, v, i + 1)?).is_some() {
            return Err(ConfigError::Parse { line: i + 1, msg: format!("duplicate key '{k}'") });
        }
    }
    Ok((command, values))
}

/// Parses, fills defaults for `command` (or the `command` key) and validates.
pub fn parse_config(text: &str, command: Option<&str>) -> Result<RunConfig, ConfigError> {
    let (cmd, values) = parse_text(text)?;
    let command = command.map(str::to_string).or(cmd).unwrap_or_else(|| "construct".into());
    let mut cfg = RunConfig { command, values, defaulted: Vec::new() };
    cfg.fill_defaults()?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn default(&mut self, key: &str, v: Param) {
        if !self.values.contains_key(key) {
            self.values.insert(key.into(), v);
            self.defaulted.push(key.into());
        }
    }

    fn fill_defaults(&mut self) -> Result<(), ConfigError> {
        use Param::*;
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(invalid(format!("unknown command '{}'", self.command)));
        }
        self.default("seed", Int(0));
        match self.command.as_str() {
            "construct" => {
                self.default("variant", Text("lq".into()));
                match self.text("variant") {
                    "lq" => self.default("q", Float(4.0)),
                    "orlicz" => self.default("phi", Text("power:3".into())),
                    _ => {}
                }
                self.default("stages", Int(4));
                self.default("eps_rule", Text("wiener".into()));
                self.default("grid", Int(psf_core::pipeline::PIPELINE_GRID as u64));
                self.default("out", Text("psf-out".into()));
            }
            "verify" => {}
            "kahane" => {
                self.default("interval", List(vec![0.8, 0.9]));
                self.default("delta", Float(0.05));
                self.default("atoms", Int(40));
            }
            "concentration" => {
                self.default("variant", Text("lq".into()));
                match self.text("variant") {
                    "lq" => self.default("q", Float(4.0)),
                    "orlicz" => {
                        self.default("phi", Text("power:3".into()));
                        self.default("r", Float(0.3));
                    }
                    _ => {}
                }
                self.default("n", Int(8));
                self.default("s", List(vec![0.81, 0.85, 0.89]));
                self.default("alphas", List(vec![0.2, 0.4, 0.8]));
            }
            "auxiliary" => {
                self.default("eta", Float(0.5));
                self.default("p", Float(1.5));
            }
            "generator" => {
                self.default("p", Float(1.5));
                self.default("stages", Int(3));
                self.default("grid", Int(psf_core::pipeline::PIPELINE_GRID as u64));
            }
            "shrink" => {
                self.default("q", Float(4.0));
                self.default("eps", Float(0.5));
                // leaves room for dilations under the default grid cap
                self.default("grid", Int(1 << 18));
            }
            "orlicz-check" => {
                self.default("phi", Text("power:3".into()));
                self.default("t", List(vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]));
            }
            "dimension" => self.default("gamma", Float(0.25)),
            _ => unreachable!(),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if let Some(v) = self.values.get("variant") {
            let Param::Text(v) = v else { unreachable!() };
            let ok: &[&str] = match self.command.as_str() {
                "construct" => &["lq", "c0", "orlicz"],
                "concentration" => &["lq", "c0", "orlicz", "generators"],
                _ => &["lq", "c0", "orlicz", "generators", "lq_with_measure"],
            };
            if !ok.contains(&v.as_str()) {
                return Err(invalid(format!("variant must be one of {}", ok.join(", "))));
            }
        }
        if let Some(q) = self.float("q") {
            if !(q > 2.0) {
                return Err(invalid("q must exceed 2"));
            }
        }
        if let Some(q0) = self.float("q0") {
            if !(q0 > 2.0) {
                return Err(invalid("q0 must exceed 2"));
            }
        }
        if let Some(p) = self.float("p") {
            if !(p > 1.0 && p < 2.0) {
                return Err(invalid("p must lie in (1, 2)"));
            }
        }
        if let Some(e) = self.float("eps") {
            if !(e > 0.0 && e < 1.0) {
                return Err(invalid("eps must lie in (0, 1)"));
            }
        }
        if let Some(e) = self.float("eta") {
            if !(e > 0.0 && e < 1.0) {
                return Err(invalid("eta must lie in (0, 1)"));
            }
        }
        if let Some(g) = self.float("gamma") {
            if !(g > 0.0 && g < 0.5) {
                return Err(invalid("gamma must lie in (0, 1/2)"));
            }
        }
        if let Some(d) = self.float("delta") {
            if !(d > 0.0) {
                return Err(invalid("delta must be positive"));
            }
        }
        if let Some(iv) = self.list("interval") {
            if iv.len() != 2 || !(0.0 < iv[0] && iv[0] < iv[1] && iv[1] < 1.0) {
                return Err(invalid("interval must be 'a,b' with 0 < a < b < 1"));
            }
        }
        for key in ["grid", "grid_cap"] {
            if let Some(g) = self.int(key) {
                if !(g >= 8 && g.is_power_of_two()) {
                    return Err(invalid(format!("{key} must be a power of two >= 8")));
                }
            }
        }
        if let Some(s) = self.list("s") {
            if s.iter().any(|v| !(*v >= 0.0)) {
                return Err(invalid("s values must be nonnegative"));
            }
        }
        if let Some(t) = self.list("t") {
            if t.iter().any(|v| !(*v > 0.0)) {
                return Err(invalid("t values must be positive"));
            }
        }
        if self.values.contains_key("phi") {
            self.phi().map_err(|e| invalid(e.to_string()))?;
        }
        if let Some(r) = self.values.get("eps_rule") {
            if !matches!(r, Param::Text(t) if t == "wiener" || t == "budget") {
                return Err(invalid("eps_rule must be wiener or budget"));
            }
        }
        match self.command.as_str() {
            "construct" if self.int("stages") == Some(0) => Err(invalid("stages must be at least 1")),
            "generator" if self.int("stages").unwrap_or(0) > 4 => Err(invalid("stages must be at most 4")),
            "verify" if !self.values.contains_key("dir") => Err(invalid("verify needs dir")),
            "concentration" if self.text("variant") == "orlicz" && self.float("r").is_none() => {
                Err(invalid("orlicz concentration needs r"))
            }
            _ => Ok(()),
        }
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        match self.values.get(key) {
            Some(Param::Float(x)) => Some(*x),
            Some(Param::Int(n)) => Some(*n as f64),
            _ => None,
        }
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        match self.values.get(key) {
            Some(Param::Int(n)) => Some(*n),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(Param::Text(s)) => s,
            _ => "",
        }
    }

    pub fn list(&self, key: &str) -> Option<&[f64]> {
        match self.values.get(key) {
            Some(Param::List(v)) => Some(v),
            _ => None,
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|_| PathBuf::from(self.text(key)))
    }

    /// `power:q` or `power_log:q:alpha`.
    pub fn phi(&self) -> psf_core::Result<OrliczFunction> {
        parse_phi(self.text("phi"))
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), Value::from(self.command.clone()));
        for (k, v) in &self.values {
            m.insert(k.clone(), v.to_json());
        }
        m.insert("defaulted".into(), Value::from(self.defaulted.clone()));
        Value::Object(m)
    }
}

pub fn parse_phi(s: &str) -> psf_core::Result<OrliczFunction> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| psf_core::Error::Parse(format!("bad number '{x}' in phi")));
    match parts.as_slice() {
        ["power", q] => OrliczFunction::power(num(q)?),
        ["power_log", q, a] => OrliczFunction::power_log(num(q)?, num(a)?),
        _ => Err(psf_core::Error::Parse(format!("phi must be power:q or power_log:q:alpha, got '{s}'"))),
    }
}

pub fn phi_label(phi: &OrliczFunction) -> String {
    match phi.family {
        psf_core::norms::OrliczFamily::Power { q } => format!("power:{q}"),
        psf_core::norms::OrliczFamily::PowerLog { q, alpha } => format!("power_log:{q}:{alpha}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_all_defaults() {
        let c = parse_config("", Some("construct")).unwrap();
        assert_eq!(c.text("variant"), "lq");
        assert_eq!(c.float("q"), Some(4.0));
        assert!(c.defaulted.iter().any(|k| k == "variant"));
        assert!(c.defaulted.iter().any(|k| k == "q"));
    }

    #[test]
    fn given_keys_are_not_flagged() {
        let c = parse_config("variant = lq\nq = 4\n", Some("construct")).unwrap();
        assert_eq!(c.float("q"), Some(4.0));
        assert!(!c.defaulted.iter().any(|k| k == "q" || k == "variant"));
    }

    #[test]
    fn small_q_rejected() {
        let e = parse_config("variant = lq\nq = 1.5", Some("construct")).unwrap_err();
        assert!(e.to_string().contains("q must exceed 2"), "{e}");
    }

    #[test]
    fn unknown_key_names_line() {
        let e = parse_config("q = 4\nfoo = 1\n", Some("construct")).unwrap_err();
        assert_eq!(e, ConfigError::Parse { line: 2, msg: "unknown key 'foo'".into() });
    }

    #[test]
    fn json_document() {
        let c = parse_config(r#"{"command": "kahane", "interval": [0.8, 0.9], "delta": 0.05}"#, None).unwrap();
        assert_eq!(c.command, "kahane");
        assert_eq!(c.list("interval"), Some(&[0.8, 0.9][..]));
        assert!(parse_config(r#"{"bogus": 1}"#, Some("kahane")).is_err());
    }
}
