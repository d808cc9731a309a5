use std::path::Path;
use std::process::{Command, Output};

fn lanecoop(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanecoop"))
        .args(args)
        .args(["--out-dir", out.to_str().unwrap()])
        .output()
        .unwrap()
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = lanecoop(&["ingest", "--synthetic", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_config_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "epochs = many\n").unwrap();
    let o = lanecoop(&["ingest", "--synthetic", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_trajectory_csv_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    std::fs::write(&csv, "Vehicle_ID,Frame_ID\n1,notanumber\n").unwrap();
    let o = lanecoop(&["ingest", "--input", csv.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn wrong_artifact_kind_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanecoop(&["fit-irl", "--synthetic", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let omega = dir.path().join("omega.json");
    let o = lanecoop(&["eval", "--synthetic", "--model", omega.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn every_output_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanecoop(&["ingest", "--synthetic", "--seed", "11"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lanecoop(&["detect", "--synthetic", "--seed", "11"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut seen = 0;
    for e in std::fs::read_dir(dir.path()).unwrap() {
        let p = e.unwrap().path();
        let bytes = std::fs::read(&p).unwrap();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let text = String::from_utf8(bytes).unwrap();
                assert!(text.starts_with("# lanecoop "), "{name}");
                assert!(text.lines().next().unwrap().contains("seed=11"), "{name}");
            }
            Some("json") => {
                let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                assert_eq!(v["provenance"]["seed"], 11, "{name}");
                assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 16, "{name}");
            }
            Some("jsonl") => {
                let first = bytes.split(|&b| b == b'\n').next().unwrap();
                let v: serde_json::Value = serde_json::from_slice(first).unwrap();
                assert_eq!(v["provenance"]["seed"], 11, "{name}");
            }
            Some("bin") => {
                assert!(bytes.starts_with(b"LCSAMP01"), "{name}");
                assert!(bytes.windows(9).any(|w| w == b"\"seed\":11"), "{name}");
            }
            _ => panic!("unexpected output {name}"),
        }
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn run_report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanecoop(
        &["simulate", "--scenario", "blocked", "--mode", "idm_mobil"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/run_report.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_idm_mobil.json")).unwrap()).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let mut broken = report.clone();
    broken["content"]["mode"] = "teleport".into();
    assert!(!validator.is_valid(&broken));
}
