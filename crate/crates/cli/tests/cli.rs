use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tvpolar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvpolar"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fixture(dir: &Path) -> String {
    let out = tvpolar(&["fixture", "--small", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("config.toml").display().to_string()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&tvpolar(&["no-such-stage"])), 1);
    assert_eq!(code(&tvpolar(&["ingest"])), 1);
    assert_eq!(code(&tvpolar(&["ingest", "--jobs", "many"])), 1);
    assert_eq!(code(&tvpolar(&["--help"])), 0);
}

#[test]
fn validation_and_dependency_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    assert_eq!(code(&tvpolar(&["ingest", "--config", &cfg, "--threshold", "1.5"])), 2);
    assert_eq!(code(&tvpolar(&["ingest", "--config", &cfg, "--window", "weekly"])), 1);

    assert_eq!(code(&tvpolar(&["segment", "--config", &cfg])), 3);
    assert_eq!(code(&tvpolar(&["ingest", "--config", &cfg])), 0);
    assert_eq!(code(&tvpolar(&["segment", "--config", &cfg])), 0);
    let out = tvpolar(&["weak-classify", "--config", &cfg]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("expand-dict"));

    fs::write(dir.path().join("episodes.jsonl"), "not json\n").unwrap();
    assert_eq!(code(&tvpolar(&["ingest", "--config", &cfg])), 2);
    fs::write(dir.path().join("config.toml"), "seed = 1\nmystery = 2\n").unwrap();
    assert_eq!(code(&tvpolar(&["ingest", "--config", &cfg])), 2);
}

#[test]
fn fixture_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());

    // stops at import-annotations until records exist
    let out = tvpolar(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("serve-annotation"));

    assert_eq!(code(&tvpolar(&["simulate-annotations", "--config", &cfg])), 0);
    let out = tvpolar(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("export-figures: done"));

    let exports = dir.path().join("exports");
    let names: Vec<String> = fs::read_dir(&exports)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 7);
    for n in &names {
        let text = fs::read_to_string(exports.join(n)).unwrap();
        assert!(text.contains("# config_hash=") && text.contains("# stage_inputs="), "{n}");
    }

    let again = tvpolar(&["run", "--config", &cfg]);
    assert_eq!(code(&again), 0);
    assert_eq!(stdout(&again).matches(": cached").count(), 12);

    // --jobs leaves the config hash and hence the cache untouched
    let seq = tvpolar(&["run", "--config", &cfg, "--jobs", "1"]);
    assert_eq!(stdout(&seq).matches(": cached").count(), 12);
    // a different window is a different config
    let yearly = tvpolar(&["polarization", "--config", &cfg, "--window", "yearly"]);
    assert_eq!(code(&yearly), 3);
}
