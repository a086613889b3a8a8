use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bsemitoric"));
    c.env_remove("BSEMITORIC_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("bsemitoric-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn classify_bcso_reports_two_focus_focus_poles() {
    let out = run(&["classify", "--system", "bcso", "--no-scan"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["provenance"]["command"], "classify");
    let fps = v["fixed_points"].as_array().unwrap();
    assert_eq!(fps.len(), 2);
    for fp in fps {
        assert_eq!(fp["type"], "focus-focus");
        for ev in fp["spectrum"].as_array().unwrap() {
            let re = ev[0].as_f64().unwrap();
            let im = ev[1].as_f64().unwrap();
            assert!((re.abs() - 1.0).abs() < 1e-8 && (im.abs() - 1.0).abs() < 1e-8, "{ev}");
        }
    }
}

#[test]
fn tsweep_reports_both_transitions() {
    let out = run(&["tsweep", "--system", "cam1", "--R1", "1", "--R2", "2", "--steps", "101"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 101);
    let tr = v["transitions"].as_array().unwrap();
    assert_eq!(tr.len(), 4);
    for t in tr {
        assert!(t["deviation"].as_f64().unwrap() <= 1e-5);
    }
}

#[test]
fn verify_exit_codes() {
    let ok = run(&["verify", "--system", "cam1", "--t", "0.5"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["passed"], true);
    let broken = run(&["verify", "--system", "cambroken", "--t", "0.5"]);
    assert_eq!(broken.status.code(), Some(1));
    let v = json(&broken);
    assert_eq!(v["integrable"], false);
    assert_eq!(v["passed"], false);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["frobnicate"],
        vec!["verify"],
        vec!["verify", "--system", "nonesuch"],
        vec!["image", "--system", "bcso", "--subset", "left-half"],
        vec!["tsweep", "--system", "cam1", "--steps", "many"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bad_parameters_exit_one() {
    let out = run(&["classify", "--system", "cam1", "--R1", "2", "--R2", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = ["image", "--system", "bcso", "--samples", "20000", "--subset", "first-factor-lower"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    let seq = run(&[&args[..], &["--sequential"]].concat());
    assert_eq!(a.stdout, seq.stdout);
}

#[test]
fn image_writes_csv_and_coverage() {
    let dir = scratch_dir("image");
    let csv = dir.join("bcso.csv");
    let out = run(&["image", "--system", "bcso", "--samples", "50000", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("L,H,chart,subset"));
    assert_eq!(lines.count(), 50000);
    let cov: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("bcso.coverage.json")).unwrap()).unwrap();
    assert_eq!(cov["cells_total"], 900);
    assert!(cov["cells_hit"].as_u64().unwrap() > 800);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn out_dir_env_names_artifacts() {
    let dir = scratch_dir("env");
    let out = bin().args(["loci", "--system", "bcso-reversed"]).env("BSEMITORIC_OUT_DIR", &dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.join("loci-bcso-reversed.csv")).unwrap();
    assert!(text.starts_with("component,chart,c1,c2,c3,c4,mu,L,H\n"));
    assert!(text.lines().count() > 100);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn flow_conserves_both_integrals() {
    let out = run(&["flow", "--system", "cam1", "--which", "h", "--t-max", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("t,chart,c1,c2,c3,c4,L,H"));
    let vals: Vec<(f64, f64)> = rows
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            (f[6].parse().unwrap(), f[7].parse().unwrap())
        })
        .collect();
    let (l0, h0) = vals[0];
    for (l, h) in &vals {
        assert!((l - l0).abs() < 1e-6 && (h - h0).abs() < 1e-6);
    }
}

#[test]
fn manifest_lists_every_figure() {
    let dir = scratch_dir("manifest");
    let out = run(&["manifest", "--samples", "2000", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let figs = m["figures"].as_array().unwrap();
    let kinds: Vec<&str> = figs.iter().map(|f| f["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["cso", "bcso", "bcso-reversed", "cam-sweep-1", "cam-sweep-2", "cam-sweep-3", "cam-classical"]);
    for f in figs {
        for p in f["panels"].as_array().unwrap() {
            for s in p["samples"].as_array().unwrap() {
                assert!(dir.join(s["file"].as_str().unwrap()).is_file());
            }
            assert!(dir.join(p["fixed_points"].as_str().unwrap()).is_file());
        }
        if let Some(b) = f["boundary"].as_str() {
            assert!(dir.join(b).is_file());
        }
    }
    std::fs::remove_dir_all(dir).unwrap();
}
