//! CLI-level integration: subcommands, exit codes, artifact layout and
//! byte-for-byte reproducibility.

use std::path::{Path, PathBuf};
use std::process::Command;
use surfweave::mesh::format_mesh;
use surfweave::synth;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_surfweave"))
}

fn write_rect_mesh(dir: &Path) -> (PathBuf, String) {
    let mesh = synth::flat_grid(10.0, 6.0, 20, 12);
    let path = dir.join("rect.mesh");
    std::fs::write(&path, format_mesh(&mesh)).unwrap();
    let chain: Vec<String> = synth::flat_grid_left_edge(20, 12)
        .iter()
        .map(usize::to_string)
        .collect();
    (path, format!("curve:{}", chain.join(",")))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("surfweave-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn pipeline_produces_all_artifacts() {
    let dir = tmp_dir("artifacts");
    let (mesh, source) = write_rect_mesh(&dir);
    let out = dir.join("run");
    let status = bin()
        .args(["pipeline", "--mesh"])
        .arg(&mesh)
        .args(["--sh", "2", "--source", &source, "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "K.json",
        "W.json",
        "program.wcode",
        "K.ppm",
        "W.ppm",
        "fabric.json",
        "report.json",
        "histogram.csv",
        "distances.csv",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
}

#[test]
fn identical_inputs_yield_byte_identical_outputs() {
    let dir = tmp_dir("determinism");
    let (mesh, source) = write_rect_mesh(&dir);
    let (out1, out2) = (dir.join("a"), dir.join("b"));
    for out in [&out1, &out2] {
        let status = bin()
            .args(["pipeline", "--mesh"])
            .arg(&mesh)
            .args(["--sh", "2", "--seed", "7", "--source", &source, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["K.json", "W.json", "program.wcode", "fabric.json", "report.json"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn non_disk_mesh_exits_3_without_partial_outputs() {
    let dir = tmp_dir("topology");
    let mesh = dir.join("ico.mesh");
    std::fs::write(&mesh, format_mesh(&synth::icosahedron(10.0))).unwrap();
    let out = dir.join("run");
    let status = bin()
        .args(["compile", "--mesh"])
        .arg(&mesh)
        .args(["--sh", "2", "--source", "point:0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    assert!(!out.exists(), "no partial outputs on failure");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tmp_dir("config");
    let (mesh, source) = write_rect_mesh(&dir);
    let status = bin()
        .args(["compile", "--mesh"])
        .arg(&mesh)
        .args(["--sh", "0", "--source", &source, "--out"])
        .arg(dir.join("run"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn closed_isocurve_exits_3() {
    let dir = tmp_dir("loops");
    let mesh = dir.join("bumps.mesh");
    std::fs::write(&mesh, format_mesh(&synth::two_bump(60, 30))).unwrap();
    let chain: Vec<String> = synth::two_bump_midline(60, 30)
        .iter()
        .map(usize::to_string)
        .collect();
    let status = bin()
        .args(["compile", "--mesh"])
        .arg(&mesh)
        .args(["--sh", "2", "--source", &format!("curve:{}", chain.join(",")), "--out"])
        .arg(dir.join("run"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn simulate_empty_program() {
    let dir = tmp_dir("simulate");
    let wcode = dir.join("empty.wcode");
    std::fs::write(&wcode, "A\nE\n").unwrap();
    let out = dir.join("run");
    let status = bin()
        .args(["simulate", "--wcode"])
        .arg(&wcode)
        .args(["--sh", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let fabric: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("fabric.json")).unwrap()).unwrap();
    assert_eq!(fabric["nodes"].as_array().unwrap().len(), 0);
    assert_eq!(fabric["edges"].as_array().unwrap().len(), 0);
}

#[test]
fn corrupt_wcode_exits_5() {
    let dir = tmp_dir("badwcode");
    let wcode = dir.join("bad.wcode");
    std::fs::write(&wcode, "A\nB 0101\nC 0101\nD0\nB 01011\nC 01011\nD1\nE\n").unwrap();
    let output = bin()
        .args(["simulate", "--wcode"])
        .arg(&wcode)
        .args(["--sh", "2", "--out"])
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(5));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 5"), "diagnostic names the line: {stderr}");
}

#[test]
fn verify_threshold_zero_exits_6() {
    let dir = tmp_dir("threshold");
    let (mesh, source) = write_rect_mesh(&dir);
    let out = dir.join("run");
    let status = bin()
        .args(["pipeline", "--mesh"])
        .arg(&mesh)
        .args(["--sh", "2", "--source", &source, "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    // Standalone verify with impossible thresholds from a config file.
    let config = dir.join("strict.json");
    std::fs::write(
        &config,
        r#"{"s_h": 2.0, "rms_threshold_factor": 0.0, "max_threshold_factor": 0.0}"#,
    )
    .unwrap();
    let status = bin()
        .args(["verify", "--fabric"])
        .arg(out.join("fabric.json"))
        .arg("--mesh")
        .arg(&mesh)
        .arg("--config")
        .arg(&config)
        .args(["--out"])
        .arg(dir.join("verify-run"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(6));
}

#[test]
fn compile_then_simulate_then_verify_chain() {
    let dir = tmp_dir("chain");
    let (mesh, source) = write_rect_mesh(&dir);
    let out = dir.join("run");
    assert!(bin()
        .args(["compile", "--mesh"])
        .arg(&mesh)
        .args(["--sh", "2", "--source", &source, "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["simulate", "--wcode"])
        .arg(out.join("program.wcode"))
        .args(["--sh", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["verify", "--fabric"])
        .arg(out.join("fabric.json"))
        .arg("--mesh")
        .arg(&mesh)
        .args(["--sh", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    assert!(out.join("report.json").exists());
}
