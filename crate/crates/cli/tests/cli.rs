use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stringlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stringlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| rec.unwrap()[idx].parse::<f64>().unwrap())
        .collect()
}

#[test]
fn certificate_reference_values() {
    let out = stringlab(&["certificate"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["eps1"].as_f64().unwrap() - 0.07087).abs() < 5e-4);
    assert!((json["T"].as_f64().unwrap() - 70.22).abs() < 0.05);
    assert_eq!(json["feasible"], true);
}

#[test]
fn certificate_without_velocity_feedback_fails() {
    let out = stringlab(&["certificate", "--preset", "d"]);
    assert!(!out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["feasible"], false);
}

#[test]
fn malformed_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"rho1\": oops}").unwrap();
    let out = stringlab(&["certificate", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json"), "{err}");

    fs::write(&cfg, "{\"mass\": 1.0}").unwrap();
    let out = stringlab(&["certificate", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn spectrum_for_full_damping() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = stringlab(&["spectrum", "--preset", "c", "--out", out_dir]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("c/spectrum.csv");
    let residual = column(&csv, "residual");
    assert_eq!(residual.len(), 124);
    assert!(residual.iter().all(|&r| r <= 1e-8));
    assert!(dir.path().join("c/meta.json").exists());
}

#[test]
fn conservative_spectrum_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"b0": 0, "b1": 0, "d1": 0}"#).unwrap();
    let out = stringlab(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let norm = summary["norm"].as_f64().unwrap();
    let re = column(&dir.path().join("custom/spectrum.csv"), "re");
    assert!(re.iter().all(|x| x.abs() <= 1e-8 * norm));
}

#[test]
fn zero_initial_condition_has_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = stringlab(&[
        "simulate",
        "--preset",
        "c",
        "--ic",
        "zero",
        "--t-final",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let e = column(&dir.path().join("c/energy.csv"), "E");
    assert_eq!(e.len(), 51);
    assert!(e.iter().all(|&x| x == 0.0));
}

#[test]
fn full_damping_decays_exponentially() {
    let dir = tempfile::tempdir().unwrap();
    let out = stringlab(&["simulate", "--preset", "c", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["r2_exp"].as_f64().unwrap() >= 0.95);
    let e_norm = column(&dir.path().join("c/energy.csv"), "E_norm");
    assert_eq!(e_norm[0], 1.0);
    assert!(*e_norm.last().unwrap() < 1.0);
}

#[test]
fn lumped_interface_energy_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = stringlab(&[
        "simulate",
        "--preset",
        "c",
        "--interface",
        "lumped",
        "--t-final",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let e = column(&dir.path().join("c/energy.csv"), "E");
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-10 * e[0]));
}

#[test]
fn full_damping_outpaces_velocity_feedback_only() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = |preset: &str| {
        let out = stringlab(&["simulate", "--preset", preset, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
        let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        s["sigma_hat"].as_f64().unwrap()
    };
    let (a, c) = (sigma("a"), sigma("c"));
    assert!(c >= 2.0 * a, "sigma(c) = {c}, sigma(a) = {a}");
}

#[test]
fn snapshots_and_matrix_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("mats");
    let out = stringlab(&[
        "simulate",
        "--n1",
        "3",
        "--n2",
        "4",
        "--t-final",
        "0.1",
        "--snapshots",
        "--dump-matrices",
        mats.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let x = column(&dir.path().join("custom/snapshots.csv"), "x");
    // 11 recorded times, 10 nodes each (clamped end included)
    assert_eq!(x.len(), 11 * 10);
    for name in ["mfull.mtx", "k.mtx", "dmat.mtx"] {
        let text = fs::read_to_string(mats.join(name)).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("9 9 "));
    }
}

#[test]
fn sample_file_initial_condition() {
    let dir = tempfile::tempdir().unwrap();
    let ic = dir.path().join("ic.json");
    fs::write(
        &ic,
        r#"{"segment1": {"displacement": [0, 0.5, 1], "velocity": [0, 0, 0]},
            "segment2": {"displacement": [1, 0.5, 0], "velocity": [0, 0, 0]}}"#,
    )
    .unwrap();
    let arg = format!("file:{}", ic.display());
    let ok = stringlab(&[
        "simulate", "--n1", "1", "--n2", "1", "--t-final", "0.1", "--ic", &arg, "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let wrong = stringlab(&[
        "simulate", "--n1", "2", "--n2", "1", "--t-final", "0.1", "--ic", &arg, "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!wrong.status.success());
}

#[test]
fn sweep_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, presets: &str| {
        let out_dir = dir.path().join(sub);
        let out = stringlab(&[
            "sweep",
            "--presets",
            presets,
            "--n1",
            "10",
            "--n2",
            "10",
            "--t-final",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let first = run("one", "a,b,c,d");
    let second = run("two", "a,b,c,d");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("summary.json")).unwrap()).unwrap();
    for p in ["a", "b", "c", "d"] {
        for key in ["abscissa", "min_gap", "sigma_hat", "r2_exp", "E_norm_final"] {
            assert!(summary[p][key].is_number(), "{p}.{key}");
        }
        assert!(first.join(format!("spectrum_{p}.csv")).exists());
        for file in ["energy.csv", "spectrum.csv"] {
            let a = fs::read(first.join(p).join(file)).unwrap();
            let b = fs::read(second.join(p).join(file)).unwrap();
            assert_eq!(a, b, "{p}/{file} differs between identical runs");
        }
    }

    let single = run("single", "c");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(single.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_object().unwrap().len(), 1);

    let bad = stringlab(&["sweep", "--presets", "a,x", "--out", dir.path().to_str().unwrap()]);
    assert!(!bad.status.success());
}
