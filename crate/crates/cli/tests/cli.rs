use std::path::Path;
use std::process::{Command, Output};

fn locsub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locsub")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
    "mesh": {"kind": "sphere", "h": 16},
    "eccentricities": [0.5, 0.8],
    "dipoles_per_eccentricity": 3,
    "sensors": {"electrodes": 16, "coils": 8}
}"#;

#[test]
fn seed_is_required() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = locsub(&["sphere-study", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", r#"{"seed": 1, "colour": "red"}"#);
    assert_eq!(locsub(&["sphere-study", "--config", &unknown]).status.code(), Some(2));
    let bad = write(dir.path(), "b.json", r#"{"seed": 1, "eccentricities": [1.2]}"#);
    assert_eq!(locsub(&["sphere-study", "--config", &bad]).status.code(), Some(2));
    assert_eq!(locsub(&["mesh", "info", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let flat = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 1 1 0\n$EndNodes\n\
                $Elements\n1\n1 4 2 1 1 1 2 3 4\n$EndElements\n";
    let msh = write(dir.path(), "flat.msh", flat);
    assert_eq!(locsub(&["mesh", "info", &msh]).status.code(), Some(3));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = locsub(&["sphere-study", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "11");
    let b = run("b.csv", "11");
    let c = run("c.csv", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("#schema=sphere-study/1"));
    assert!(lines.next().unwrap().starts_with("index,eccentricity,x,y,z,mx,my,mz,approach"));
    assert_eq!(lines.count(), 6);
    for side in ["a.summary.csv", "a.summary.json", "a.timings.csv"] {
        assert!(dir.path().join(side).exists(), "{side}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["groups"].as_array().unwrap().len(), 2);
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "i.json",
        r#"{"seed": 1, "integration": {"element": "hex", "terms": [{"problem": "eeg", "term": "patch"}], "orders": [4, 8], "ratios": [0.5]}}"#,
    );
    let out = locsub(&["integration-study", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("hex,eeg-patch,"));
    let err: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!(err < 1e-3);
}

#[test]
fn extension_study_has_a_column_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = locsub(&["extension-study", "--config", &cfg, "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(header.ends_with("status,error_n0,error_n1,error_n2,error_n3,error_full"), "{header}");
}

#[test]
fn mesh_gen_then_info() {
    let dir = tempfile::tempdir().unwrap();
    for (file, kind) in [("m.json", "hex"), ("m.msh", "tet")] {
        let path = dir.path().join(file);
        let p = path.to_str().unwrap();
        let o = locsub(&["mesh", "gen", "--h", "16", "--element", kind, "--out", p]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let info = locsub(&["mesh", "info", p]);
        assert!(info.status.success());
        let text = String::from_utf8(info.stdout).unwrap();
        assert!(text.contains(&format!("kind {kind}")), "{text}");
        assert_eq!(text.lines().filter(|l| l.starts_with("volume[")).count(), 4);
    }
    // hexahedra cannot be written as Gmsh tetrahedra
    let p = dir.path().join("h.msh");
    let o = locsub(&["mesh", "gen", "--h", "16", "--out", p.to_str().unwrap()]);
    assert!(!o.status.success());
}
