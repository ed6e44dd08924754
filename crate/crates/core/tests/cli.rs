//! End-to-end checks of the command-line interface: exit codes, report
//! files, stage skipping and determinism of the emitted JSON.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extgeom"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

#[test]
fn trivial_scenario_exits_zero() {
    let out = bin()
        .args(["run"])
        .arg(scenario("trivial.json"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("summary:"));
    assert!(text.contains("0 failed"));
}

#[test]
fn plane_wave_scenario_passes_field_equations() {
    let out = bin()
        .args(["run"])
        .arg(scenario("plane_wave.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("yang-mills"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn broken_scenario_exits_one_and_skips_later_stages() {
    let out = bin()
        .args(["run"])
        .arg(scenario("broken_coefficients.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL"), "{text}");
    assert!(
        text.contains("earlier stage `gauge` reported failing identities"),
        "{text}"
    );
}

#[test]
fn missing_file_exits_two() {
    let out = bin().args(["run", "no-such-file.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_json_exits_two() {
    let dir = std::env::temp_dir().join("extgeom-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = bin().args(["run"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_file_is_written_and_deterministic() {
    let dir = std::env::temp_dir().join("extgeom-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let r1 = dir.join("report1.json");
    let r2 = dir.join("report2.json");
    for r in [&r1, &r2] {
        let out = bin()
            .args(["run"])
            .arg(scenario("tetrad_identity.json"))
            .args(["--samples", "16", "--report"])
            .arg(r)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(&r1).unwrap();
    let b = std::fs::read(&r2).unwrap();
    assert_eq!(a, b);
    let doc: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(doc["reports"].as_array().unwrap().len() > 10);
    // Every row carries a tag from the fixed set.
    for row in doc["reports"].as_array().unwrap() {
        assert!(row["tag"].is_string());
        assert!(!row["tag"].as_str().unwrap().is_empty());
    }
}

#[test]
fn stage_filter_limits_rows() {
    let out = bin()
        .args(["run"])
        .arg(scenario("tetrad_rotation.json"))
        .args(["--stages", "algebra", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let stages = doc["stages"].as_array().unwrap();
    for s in stages {
        if s["stage"] == "algebra" {
            assert_eq!(s["status"], "ran");
        } else {
            assert_eq!(s["status"], "skipped");
        }
    }
}

#[test]
fn check_group_runs_presets_and_files() {
    for name in ["abelian4", "u1", "su2", "su2xu1"] {
        let out = bin().args(["check-group", name]).output().unwrap();
        assert!(out.status.success(), "{name}");
    }
    let dir = std::env::temp_dir().join("extgeom-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("group.json");
    std::fs::write(
        &path,
        r#"{"dim": 2, "f": [[[0.0, 1.0],[ -1.0, 0.0]],[[0.0,0.0],[0.0,0.0]]]}"#,
    )
    .unwrap();
    let out = bin().args(["check-group"]).arg(&path).output().unwrap();
    // Those constants are antisymmetric in the lower pair only if
    // f^c_{ab} = -f^c_{ba}: here f^0_{01} = 1, f^0_{10} = -1, fine; and the
    // Jacobi sum vanishes in dimension 2.
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn validate_reports_scenario_summary() {
    let out = bin()
        .args(["validate"])
        .arg(scenario("tetrad_rotation.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("su2xu1"));
}
