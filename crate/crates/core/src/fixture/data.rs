//! A fixture laid out on disk the way the pipeline expects real inputs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{simulate_annotations, AnnotatorConfig, Fixture, FixtureTruth};
use crate::error::Result;
use crate::pipeline::artifact::{read_json, write_atomic, write_json, write_jsonl};
use crate::pipeline::config::{CorpusConfig, Paths, PipelineConfig};
use crate::pipeline::Pipeline;

pub const CONFIG_FILE: &str = "config.toml";

/// Config for a fixture directory; paths are relative to it.
pub fn fixture_config(fixture: &Fixture) -> PipelineConfig {
    PipelineConfig {
        seed: fixture.config.seed,
        jobs: 0,
        paths: Paths {
            episodes: "episodes.jsonl".into(),
            panel: "panel.jsonl".into(),
            review: Some("review.jsonl".into()),
            annotations: "annotations.jsonl".into(),
            predictions: None,
            truth: Some("truth.json".into()),
            work_dir: "work".into(),
            export_dir: "exports".into(),
        },
        topics: fixture.topics.clone(),
        corpus: CorpusConfig {
            stopwords: fixture.stopwords.clone(),
            confounders: fixture.confounders.clone(),
            ..CorpusConfig::default()
        },
        oracle: Default::default(),
        weak: Default::default(),
        annotation: Default::default(),
        train: Default::default(),
        polarization: Default::default(),
        divergence: Default::default(),
        consumption: Default::default(),
        export: Default::default(),
    }
}

/// Writes episodes, panel, reviewer decisions, planted truth and a config
/// into `dir`. Returns the config path.
pub fn write_fixture_dir(fixture: &Fixture, dir: &Path) -> Result<PathBuf> {
    write_jsonl(&dir.join("episodes.jsonl"), &fixture.episodes)?;
    write_jsonl(&dir.join("panel.jsonl"), &fixture.panel)?;
    write_jsonl(&dir.join("review.jsonl"), &fixture.review_decisions())?;
    write_json(&dir.join("truth.json"), &fixture.truth)?;
    let path = dir.join(CONFIG_FILE);
    write_atomic(&path, fixture_config(fixture).to_toml()?.as_bytes())?;
    Ok(path)
}

/// Answers the sampled tasks of `pipeline` from the planted truth and
/// writes the records to the configured annotations file.
pub fn simulate_annotation_file(pipeline: &Pipeline, config: &AnnotatorConfig) -> Result<usize> {
    let cfg = pipeline.config();
    let truth_path = cfg.paths.truth.as_ref().ok_or_else(|| {
        crate::Error::Config("paths.truth is required to simulate annotators".into())
    })?;
    let truth: FixtureTruth = read_json(truth_path)?;
    let corpus = pipeline.load_corpus()?;
    let topics = truth.segment_topics(&corpus)?;
    let by_id: HashMap<String, Option<String>> = corpus.segment_ids().into_iter().zip(topics).collect();
    let tasks = pipeline.load_tasks()?;
    let records = simulate_annotations(&tasks, &by_id, config)?;
    write_jsonl(&cfg.paths.annotations, &records)?;
    Ok(records.len())
}
