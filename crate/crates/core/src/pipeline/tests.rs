use std::fs;

use super::config::PipelineConfig;
use super::*;
use crate::error::Error;
use crate::fixture::{generate, simulate_annotation_file, write_fixture_dir, AnnotatorConfig, FixtureConfig};
use crate::Exec;

fn fixture_dir() -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let fx = generate(&FixtureConfig::small(11)).unwrap();
    let path = write_fixture_dir(&fx, dir.path()).unwrap();
    let cfg = PipelineConfig::load(&path).unwrap();
    (dir, cfg)
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    let (_dir, cfg) = fixture_dir();
    let text = cfg.to_toml().unwrap();
    let back = PipelineConfig::parse(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());

    let bad = text.replacen("[weak]", "[weak]\nbogus = 1", 1);
    assert!(matches!(PipelineConfig::parse(&bad), Err(Error::Config(_))));
    let bad = format!("surprise = true\n{text}");
    assert!(PipelineConfig::parse(&bad).is_err());
}

#[test]
fn hash_ignores_jobs_and_paths_only() {
    let (_dir, cfg) = fixture_dir();
    let mut other = cfg.clone();
    other.jobs = 4;
    other.paths.work_dir = "/elsewhere".into();
    assert_eq!(other.hash(), cfg.hash());
    other.weak.threshold = 0.3;
    assert_ne!(other.hash(), cfg.hash());
}

#[test]
fn validation_catches_bad_values() {
    let (_dir, cfg) = fixture_dir();
    let mut c = cfg.clone();
    c.weak.threshold = 0.0;
    assert!(c.validate().is_err());
    let mut c = cfg.clone();
    c.consumption.thresholds = vec![1.5];
    assert!(c.validate().is_err());
    let mut c = cfg;
    c.oracle.kind = config::OracleKind::File;
    assert!(c.validate().is_err());
}

#[test]
fn stage_names_round_trip() {
    for s in ALL_STAGES {
        assert_eq!(Stage::parse(s.name()), Some(s));
        // dependencies always come earlier in the run order
        let pos = ALL_STAGES.iter().position(|&x| x == s).unwrap();
        for d in s.deps() {
            assert!(ALL_STAGES.iter().position(|x| x == d).unwrap() < pos);
        }
    }
    assert_eq!(Stage::parse("serve-annotation"), None);
}

#[test]
fn missing_upstream_names_the_stage() {
    let (_dir, cfg) = fixture_dir();
    let p = Pipeline::new(cfg, Exec::Sequential).unwrap();
    match p.run(Stage::WeakClassify) {
        Err(Error::MissingDependency { stage, .. }) => assert_eq!(stage, "segment"),
        other => panic!("unexpected {other:?}"),
    }
    p.run(Stage::Ingest).unwrap();
    p.run(Stage::Segment).unwrap();
    match p.run(Stage::WeakClassify) {
        Err(Error::MissingDependency { stage, .. }) => assert_eq!(stage, "expand-dict"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_input_file_is_reported() {
    let (dir, cfg) = fixture_dir();
    fs::remove_file(dir.path().join("panel.jsonl")).unwrap();
    let p = Pipeline::new(cfg, Exec::Sequential).unwrap();
    assert!(matches!(p.run(Stage::Consumption), Err(Error::MissingInput { .. })));
}

#[test]
fn full_run_caches_and_refuses_stale_artifacts() {
    let (dir, cfg) = fixture_dir();
    let p = Pipeline::new(cfg.clone(), Exec::Parallel).unwrap();
    for s in &ALL_STAGES[..5] {
        assert_eq!(p.run(*s).unwrap(), Outcome::Ran);
    }
    // annotations come from the labeling service, which has not run yet
    match p.run(Stage::ImportAnnotations) {
        Err(Error::MissingDependency { stage, .. }) => assert_eq!(stage, "serve-annotation"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(simulate_annotation_file(&p, &AnnotatorConfig::default()).unwrap() > 0);
    let first = p.run_all().unwrap();
    assert!(first[..5].iter().all(|(_, o)| *o == Outcome::Cached));
    assert!(first[5..].iter().all(|(_, o)| *o == Outcome::Ran));
    for f in p.figure_paths() {
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.starts_with("# format_version=1\n# config_hash="), "{}", f.display());
        assert!(text.contains(p.config_hash()));
    }
    let again = p.run_all().unwrap();
    assert!(again.iter().all(|(_, o)| *o == Outcome::Cached));

    // touching an input reruns from the stage that reads it
    let ann = dir.path().join("annotations.jsonl");
    let mut data = fs::read_to_string(&ann).unwrap();
    data.push('\n');
    fs::write(&ann, data).unwrap();
    assert_eq!(p.run(Stage::ImportAnnotations).unwrap(), Outcome::Ran);

    // a changed config hash must not reuse artifacts built under the old one
    let mut changed = cfg;
    changed.weak.threshold = 0.25;
    let q = Pipeline::new(changed, Exec::Parallel).unwrap();
    assert!(matches!(q.run(Stage::Segment), Err(Error::StaleArtifact { .. })));
    assert!(matches!(q.load_corpus(), Err(Error::StaleArtifact { .. })));
    assert_eq!(q.run(Stage::Ingest).unwrap(), Outcome::Ran);
    assert_eq!(q.run(Stage::Segment).unwrap(), Outcome::Ran);
}
