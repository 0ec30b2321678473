use std::process::Command;

fn tricomi(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tricomi")).args(args).output().unwrap();
    let mut text = String::from_utf8(out.stdout).unwrap();
    text.push_str(&String::from_utf8(out.stderr).unwrap());
    (out.status.code().unwrap(), text)
}

const SUB: [&str; 10] = ["--N", "1", "--m1", "1", "--m2", "0", "--p", "2", "--q", "2"];

#[test]
fn curves_report_regime() {
    let (code, text) = tricomi(&[&["curves"], &SUB[..]].concat());
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("Omega_GG = 1.5"), "{text}");
    assert!(text.contains("GlasseySubcritical"), "{text}");
}

#[test]
fn exit_codes() {
    assert_eq!(tricomi(&["--help"]).0, 0);
    assert_eq!(tricomi(&["curves", "--N", "x"]).0, 2);
    assert_eq!(tricomi(&["simulate", "--eps", "0.5"]).0, 2);
    let (code, text) = tricomi(&[&["fit", "--records", "/nonexistent/records.csv"], &SUB[..]].concat());
    assert_eq!(code, 1, "{text}");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[exponents\nN = 1").unwrap();
    assert_eq!(tricomi(&["curves", "--config", cfg.to_str().unwrap()]).0, 2);
}

#[test]
fn special_values_and_checks() {
    let (code, text) = tricomi(&["special", "--N", "3", "--m", "0", "--lambda", "1", "--x", "1", "--t", "2"]);
    assert_eq!(code, 0, "{text}");
    let value: f64 = text.split(": ").nth(1).unwrap().trim().parse().unwrap();
    assert!((value - (-2f64).exp() * 1f64.sinh()).abs() < 1e-12);
    let (code, text) = tricomi(&["special", "--kind", "integrated", "--N", "3", "--m", "1", "--beta", "1", "--check"]);
    assert_eq!(code, 0, "{text}");
    assert_eq!(text.matches("PASS").count(), 3, "{text}");
    assert!(text.contains("SKIP W upper bound (interior)"), "{text}");
    let (code, text) = tricomi(&["special", "--kind", "integrated", "--N", "3", "--m", "1", "--beta", "2", "--check"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS W upper bound (interior)"), "{text}");
}

#[test]
fn region_plot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("region.svg");
    let (code, text) = tricomi(&[&["region", "--points", "20", "--out", svg.to_str().unwrap()], &SUB[..]].concat());
    assert_eq!(code, 0, "{text}");
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let manifest = dir.path().join("region.svg.manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "region");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_then_fit_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lifespans.csv");
    let svg = dir.path().join("fit.svg");
    let common = [&SUB[..], &["--grid-dr", "0.04", "--tmax", "40", "--out", csv.to_str().unwrap()]].concat();
    let (code, text) = tricomi(&[&["sweep", "--eps", "0.8,0.4,0.2,0.1"], &common[..]].concat());
    assert_eq!(code, 0, "{text}");
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("epsilon,T_measured,threshold,dr,dt_policy\n"));
    assert_eq!(body.lines().count(), 5);
    let (code, text) = tricomi(&[&["fit", "--plot", svg.to_str().unwrap()], &common[..]].concat());
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("verdict: Pass"), "{text}");
    assert!(std::fs::read_to_string(&svg).unwrap().contains("class=\"fit\""));
}

#[test]
fn simulate_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("snaps.csv");
    let args = [
        &["simulate", "--eps", "0.8", "--grid-dr", "0.05", "--tmax", "20"][..],
        &SUB[..],
        &["--snapshots", snaps.to_str().unwrap(), "--stride", "100"],
    ]
    .concat();
    let (code, text) = tricomi(&args);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("blow-up: T_est"), "{text}");
    assert!(std::fs::read_to_string(&snaps).unwrap().starts_with("t,r,u,v\n"));
}

#[test]
fn config_file_drives_sweep_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.toml");
    std::fs::write(
        &cfg,
        "epsilons = [0.8, 0.4, 0.2]\nt_max = 30.0\n[exponents]\nN = 1\nm1 = 1.0\nm2 = 0.0\np = 2.0\nq = 2.0\n[grid]\ndr = 0.05\n",
    )
    .unwrap();
    let csv = dir.path().join("r.csv");
    let (code, text) = tricomi(&["sweep", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let body = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().count(), 4);
    assert!(body.lines().skip(1).all(|l| l.split(',').nth(3) == Some("5.0000000000000003e-2")), "{body}");
}
