use tvpolar::fixture::{generate, simulate_annotation_file, write_fixture_dir, AnnotatorConfig, FixtureConfig};
use tvpolar::pipeline::{Outcome, Pipeline, PipelineConfig, Stage, ALL_STAGES};
use tvpolar::Exec;

fn pipeline(dir: &std::path::Path, exec: Exec) -> Pipeline {
    let fx = generate(&FixtureConfig::small(11)).unwrap();
    let cfg = write_fixture_dir(&fx, dir).unwrap();
    let p = Pipeline::new(PipelineConfig::load(&cfg).unwrap(), exec).unwrap();
    for stage in ALL_STAGES {
        if stage == Stage::ImportAnnotations {
            simulate_annotation_file(&p, &AnnotatorConfig::default()).unwrap();
        }
        assert_eq!(p.run(stage).unwrap(), Outcome::Ran, "{stage}");
    }
    p
}

#[test]
fn small_fixture_end_to_end() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = pipeline(a.path(), Exec::Parallel);
    let _ = pipeline(b.path(), Exec::Sequential);

    // second pass is all cache hits
    for stage in ALL_STAGES {
        assert_eq!(pa.run(stage).unwrap(), Outcome::Cached, "{stage}");
    }
    let exports = a.path().join("exports");
    let mut n = 0;
    for entry in std::fs::read_dir(&exports).unwrap() {
        let name = entry.unwrap().file_name();
        let x = std::fs::read(exports.join(&name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join("exports").join(&name)).unwrap(), "{name:?}");
        assert!(x.starts_with(b"# format_version=1\n"));
        n += 1;
    }
    assert_eq!(n, 7);
}
