use num_bigint::BigInt;
use num_traits::{Float, ToPrimitive};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn psf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psf")).args(args).output().expect("spawn psf")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("psf-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn dimension_binary_entropy() {
    let o = psf(&["dimension", "--gamma", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let d = json(&o)["results"]["dimension"].as_f64().unwrap();
    let want = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
    assert!((d - want).abs() < 1e-15);
}

#[test]
fn validation_and_parse_errors_have_distinct_codes() {
    let o = psf(&["construct", "--variant", "lq", "--q", "1.5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("q must exceed 2"));

    let dir = scratch("badcfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "q = 4\nwidth = 3\n").unwrap();
    let o = psf(&["construct", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("width"), "{err}");

    let o = psf(&["verify", "--dir", dir.join("absent").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
    let o = psf(&["dimension", "--gamma", "0.7"]);
    assert_eq!(o.status.code(), Some(4));
    std::fs::remove_dir_all(dir).unwrap();
}

/// `sum_j c_j s_j^k` exactly: every double is `m 2^e`, so the sum is an
/// integer times a power of two.
fn exact_moment(atoms: &[(f64, f64)], k: u32) -> f64 {
    let split = |x: f64| {
        let (m, e, sign) = x.integer_decode();
        (BigInt::from(m) * sign as i64, e as i64)
    };
    let terms: Vec<(BigInt, i64)> = atoms
        .iter()
        .map(|&(s, c)| {
            let ((ms, es), (mc, ec)) = (split(s), split(c));
            (mc * ms.pow(k), ec + k as i64 * es)
        })
        .collect();
    let e0 = terms.iter().map(|t| t.1).min().unwrap_or(0);
    let sum: BigInt = terms.into_iter().map(|(m, e)| m << (e - e0) as usize).sum();
    let shift = sum.bits().saturating_sub(64);
    (&sum >> shift as usize).to_f64().unwrap() * 2f64.powi((e0 + shift as i64) as i32)
}

#[test]
fn kahane_moment_table_matches_atoms() {
    let o = psf(&["kahane", "--interval", "0.8,0.9", "--delta", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json(&o)["results"];
    let atoms: Vec<(f64, f64)> =
        r["atoms"].as_array().unwrap().iter().map(|a| (a["s"].as_f64().unwrap(), a["c"].as_f64().unwrap())).collect();
    // weights reach 1e10 with heavy cancellation, so the oracle is exact
    assert!((exact_moment(&atoms, 0) - 1.0).abs() < 1e-10);
    assert!(atoms.iter().all(|a| a.0 > 0.8 && a.0 < 0.9));
    assert!(atoms.iter().any(|a| a.1 < 0.0));
    for row in r["moments"].as_array().unwrap() {
        let k = row["k"].as_u64().unwrap() as u32;
        let m = exact_moment(&atoms, k);
        assert!((row["moment"].as_f64().unwrap() - m).abs() < 1e-12, "k = {k}");
        assert!(m.abs() < 0.05);
    }
}

#[test]
fn config_file_json_and_flag_override() {
    let dir = scratch("json");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"gamma": 0.1}"#).unwrap();
    let o = psf(&["dimension", "--config", cfg.to_str().unwrap(), "--gamma", "0.25"]);
    let v = json(&o);
    assert_eq!(v["config"]["gamma"].as_f64(), Some(0.25));
    assert!(!v["config"]["defaulted"].as_array().unwrap().iter().any(|k| k == "gamma"));
    std::fs::remove_dir_all(dir).unwrap();
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn construct_is_deterministic_and_verifies() {
    let a = scratch("construct-a");
    let b = scratch("construct-b");
    let args = |d: &Path| {
        vec![
            "construct".to_string(),
            "--stages".into(),
            "1".into(),
            "--eps-rule".into(),
            "budget".into(),
            "--grid".into(),
            "65536".into(),
            "--out".into(),
            d.to_str().unwrap().to_string(),
        ]
    };
    let run = |d: &Path| {
        let v = args(d);
        psf(&v.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let oa = run(&a);
    let ob = run(&b);
    assert!(matches!(oa.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(oa.status.code(), ob.status.code());
    for f in ["stage_1/f.txt", "stage_1/x.txt", "stage_1/k.txt", "s.txt", "k.txt", "ledger.json", "certificate.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }
    let rep = json(&oa);
    let clauses = rep["certificates"][0]["clauses"].as_array().unwrap();
    assert!(clauses.iter().any(|c| c["description"].as_str().unwrap().contains("block 1")));
    assert!(clauses.iter().any(|c| c["description"].as_str().unwrap().starts_with("X: ")));

    let ov = psf(&["verify", "--dir", a.to_str().unwrap()]);
    let v = json(&ov);
    assert_eq!(v["results"]["matches_stored"], true);
    assert_eq!(v["results"]["digest_matches"], true);
    assert_eq!(ov.status.code(), oa.status.code());
    assert_eq!(v["certificates"][0]["clauses"], rep["certificates"][0]["clauses"]);

    // a perturbed coefficient must be noticed
    let f = a.join("stage_1/f.txt");
    let text = String::from_utf8(read(&f)).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let last = lines.len() - 1;
    let parts: Vec<&str> = lines[last].split_whitespace().collect();
    let re: f64 = parts[1].parse().unwrap();
    lines[last] = format!("{} {:.17e} {}", parts[0], re * 1.5 + 1e-3, parts[2]);
    std::fs::write(&f, lines.join("\n") + "\n").unwrap();
    let ov = psf(&["verify", "--dir", a.to_str().unwrap()]);
    assert_eq!(ov.status.code(), Some(5));
    assert_eq!(json(&ov)["results"]["matches_stored"], false);
    std::fs::remove_dir_all(a).unwrap();
    std::fs::remove_dir_all(b).unwrap();
}

#[test]
fn orlicz_check_power_three() {
    let o = psf(&["orlicz-check", "--phi", "power:3", "--t", "0.1,0.2,0.3"]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json(&o)["results"];
    // phi(2t)/phi(t) = 8 and phi(st) = phi(s) phi(t) for t^3
    assert!((r["delta2_ratio_sup"].as_f64().unwrap() - 8.0).abs() < 1e-12);
    assert!((r["submult_constant_m"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let n: Vec<u64> = r["n_of_r"].as_array().unwrap().iter().map(|x| x["n"].as_u64().unwrap()).collect();
    assert_eq!(n, vec![1000, 125, 38]);
}
