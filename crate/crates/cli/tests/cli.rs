use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn vdflab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdflab"))
        .current_dir(dir)
        .env_remove("VDFLAB_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = vdflab(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: TempDir::new().unwrap(),
        };
        ok(
            ws.path(),
            &[
                "setup",
                "--lambda",
                "16",
                "--seed",
                "7",
                "--out",
                "params.json",
                "--secrets",
                "secrets.json",
            ],
        );
        ws
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn eval(&self, scheme: &str, t: &str, out: &str) {
        ok(
            self.path(),
            &[
                "eval",
                "--params",
                "params.json",
                "--scheme",
                scheme,
                "--time-param",
                t,
                "--input",
                "smoke",
                "--out",
                out,
            ],
        );
    }

    fn verify(&self, transcript: &str) -> Output {
        vdflab(
            self.path(),
            &[
                "verify",
                "--params",
                "params.json",
                "--transcript",
                transcript,
            ],
        )
    }
}

#[test]
fn round_trip_accepts_for_proof_schemes() {
    let ws = Workspace::new();
    for (scheme, t) in [("wesolowski", "500"), ("pietrzak", "512")] {
        let name = format!("{scheme}.json");
        ws.eval(scheme, t, &name);
        let out = ws.verify(&name);
        assert_eq!(out.status.code(), Some(0), "{scheme}");
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["accept"], true);
        assert_eq!(report["scheme"], scheme);
        assert_eq!(json(&ws.file(&name))["scheme"], scheme);
    }
}

#[test]
fn two_square_verify_reports_two_squarings() {
    let ws = Workspace::new();
    ws.eval("two_square", "1000", "ts.json");
    let transcript = json(&ws.file("ts.json"));
    assert_eq!(transcript["eval_ops"]["squarings"], 1000);
    assert_eq!(transcript["eval_ops"]["multiplications"], 1);
    assert_eq!(transcript["delta"], 2);
    for variant in ["A", "B", "C"] {
        let out = vdflab(
            ws.path(),
            &[
                "verify",
                "--params",
                "params.json",
                "--transcript",
                "ts.json",
                "--variant",
                variant,
            ],
        );
        let code = out.status.code().unwrap();
        assert!(code == 0 || code == 1);
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["ops"]["squarings"], 2);
        assert_eq!(report["variant"], variant);
        assert_eq!(report["accept"], code == 0);
    }
}

fn flip_last_hex_digit(s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let last = chars.last_mut().unwrap();
    *last = if *last == '0' { '1' } else { '0' };
    chars.into_iter().collect()
}

#[test]
fn tampered_output_exits_one() {
    let ws = Workspace::new();
    for (scheme, t) in [("wesolowski", "100"), ("pietrzak", "128")] {
        let name = format!("{scheme}.json");
        ws.eval(scheme, t, &name);
        let mut v = json(&ws.file(&name));
        let y = v["y"].as_str().unwrap().to_string();
        v["y"] = Value::String(flip_last_hex_digit(&y));
        fs::write(ws.file("tampered.json"), v.to_string()).unwrap();
        let out = ws.verify("tampered.json");
        assert_eq!(out.status.code(), Some(1), "{scheme}");
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["accept"], false);
    }
}

#[test]
fn malformed_input_exits_two() {
    let ws = Workspace::new();
    ws.eval("wesolowski", "100", "w.json");
    let text = fs::read_to_string(ws.file("w.json")).unwrap();
    fs::write(ws.file("truncated.json"), &text[..text.len() / 2]).unwrap();
    assert_eq!(ws.verify("truncated.json").status.code(), Some(2));

    let mut v = json(&ws.file("w.json"));
    v["scheme"] = Value::String("sloth".into());
    fs::write(ws.file("unknown.json"), v.to_string()).unwrap();
    assert_eq!(ws.verify("unknown.json").status.code(), Some(2));

    let mut v = json(&ws.file("w.json"));
    v["y"] = Value::String("not hex".into());
    fs::write(ws.file("badhex.json"), v.to_string()).unwrap();
    assert_eq!(ws.verify("badhex.json").status.code(), Some(2));

    assert_eq!(ws.verify("missing.json").status.code(), Some(2));
}

#[test]
fn modulus_mismatch_exits_two() {
    let ws = Workspace::new();
    ws.eval("wesolowski", "100", "w.json");
    ok(
        ws.path(),
        &[
            "setup",
            "--lambda",
            "16",
            "--seed",
            "8",
            "--out",
            "other.json",
        ],
    );
    let out = vdflab(
        ws.path(),
        &["verify", "--params", "other.json", "--transcript", "w.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("moduli"));
}

#[test]
fn setup_validation_and_secret_separation() {
    let ws = Workspace::new();
    let out = vdflab(ws.path(), &["setup", "--lambda", "7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));

    let params = fs::read_to_string(ws.file("params.json")).unwrap();
    let secrets = json(&ws.file("secrets.json"));
    assert!(!params.contains(secrets["p"].as_str().unwrap()));

    // Verification works with the secrets file gone.
    fs::remove_file(ws.file("secrets.json")).unwrap();
    ws.eval("wesolowski", "64", "w.json");
    assert_eq!(ws.verify("w.json").status.code(), Some(0));

    let out = vdflab(
        ws.path(),
        &[
            "characterize",
            "--params",
            "params.json",
            "--secrets",
            "secrets.json",
            "--time-param",
            "8",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn setup_with_explicit_primes() {
    let ws = Workspace::new();
    ok(
        ws.path(),
        &[
            "setup", "--lambda", "8", "--p", "227", "--q", "167", "--out", "n.json",
        ],
    );
    assert_eq!(json(&ws.file("n.json"))["modulus"], format!("{:x}", 37909));
    let out = vdflab(ws.path(), &["setup", "--p", "13", "--q", "167"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes() {
    let a = Workspace::new();
    let b = Workspace::new();
    for f in ["params.json", "secrets.json"] {
        assert_eq!(fs::read(a.file(f)).unwrap(), fs::read(b.file(f)).unwrap());
    }
    let env_seed = Command::new(env!("CARGO_BIN_EXE_vdflab"))
        .current_dir(a.path())
        .env("VDFLAB_SEED", "7")
        .args(["setup", "--lambda", "16"])
        .output()
        .unwrap();
    assert_eq!(env_seed.stdout, fs::read(a.file("params.json")).unwrap());
}

#[test]
fn attack_report_flags_and_flag_plumbing() {
    let ws = Workspace::new();
    ok(
        ws.path(),
        &[
            "attack",
            "--lambda",
            "16",
            "--ell-bits",
            "8",
            "--trials",
            "10",
            "--seed",
            "1",
            "--out",
            "a.json",
        ],
    );
    let report = json(&ws.file("a.json"));
    assert_eq!(report["low_confidence"], true);
    assert_eq!(report["with_t_in_hash"], false);
    assert_eq!(report["trials"], 10);
    for key in [
        "ell_bits",
        "accept_rate",
        "termination_rate",
        "mean_reference_rate",
    ] {
        assert!(report.get(key).is_some(), "{key}");
    }

    ok(
        ws.path(),
        &[
            "attack",
            "--lambda",
            "16",
            "--ell-bits",
            "8",
            "--trials",
            "20",
            "--with-t-in-hash",
            "--params",
            "params.json",
            "--out",
            "t.json",
        ],
    );
    let report = json(&ws.file("t.json"));
    assert_eq!(report["with_t_in_hash"], true);
    assert!(report["per_iteration_rate"].is_number());
    assert_eq!(report["iteration_budget"], 256);
    assert!(report["honest_output_collisions"].is_null());

    let out = vdflab(ws.path(), &["attack", "--ell-bits", "25", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn attack_with_no_trials_is_empty() {
    let ws = Workspace::new();
    let out = ok(ws.path(), &["attack", "--lambda", "16", "--trials", "0"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["accept_rate"].is_null());
    assert!(report["termination_rate"].is_null());
    assert_eq!(report["trials"], 0);
}

#[test]
fn characterize_small_modulus() {
    let ws = Workspace::new();
    ok(
        ws.path(),
        &[
            "setup",
            "--lambda",
            "8",
            "--p",
            "7",
            "--q",
            "11",
            "--out",
            "p77.json",
            "--secrets",
            "s77.json",
        ],
    );
    ok(
        ws.path(),
        &[
            "characterize",
            "--params",
            "p77.json",
            "--secrets",
            "s77.json",
            "--time-param",
            "3",
            "--exhaustive",
            "--out",
            "c.json",
        ],
    );
    let report = json(&ws.file("c.json"));
    assert_eq!(report["schema"], "vdflab/two-square-characterization/v1");
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["instances"], 60);
    assert_eq!(report["variants"]["A"]["accepted"], 4);
    assert_eq!(report["exceptions"], 0);
}

#[test]
fn bench_small_grid() {
    let ws = Workspace::new();
    ok(
        ws.path(),
        &[
            "bench",
            "--lambda",
            "8",
            "--time-param",
            "16,64",
            "--sweep-samples",
            "4",
            "--out",
            "b.json",
        ],
    );
    let report = json(&ws.file("b.json"));
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for row in rows {
        match row["scheme"].as_str().unwrap() {
            "two_square" => assert_eq!(row["verify_squarings"], 2),
            "pietrzak" => assert_eq!(
                row["proof_elements"].as_u64().unwrap(),
                u64::from(row["T"].as_u64().unwrap().trailing_zeros())
            ),
            "wesolowski" => assert_eq!(row["proof_elements"], 1),
            other => panic!("unexpected scheme {other}"),
        }
        assert!(row.get("wall_times").is_none());
    }
    let out = vdflab(ws.path(), &["bench", "--time-param", "12"]);
    assert_eq!(out.status.code(), Some(2));
}
