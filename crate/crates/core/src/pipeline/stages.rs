use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::artifact::*;
use super::config::{OracleKind, PipelineConfig};
use super::layers::{self, Models};
use super::export::{write_figures, ExportHeader, FIGURE_FILES};
use super::outputs::*;
use crate::annotation::{aggregate, import_records, load_tasks, sample_tasks, AnnotationTask, GroundTruthLabel};
use crate::classify::{Cell, FeatureSpace};
use crate::corpus::{build_corpus, ingest_episodes, Corpus, Episode, IngestReport, PhraseKey, StationId};
use crate::error::{Error, Result};
use crate::metrics::load_panel;
use crate::weaksup::{
    distributional_oracle, weak_classify_corpus, CompiledDictionaries, DictionaryRecord, FileOracle,
    ReplacementOracle, ReviewDecision, WeakLabel,
};
use crate::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Segment,
    ExpandDict,
    WeakClassify,
    SampleAnnotation,
    ImportAnnotations,
    Train,
    Refine,
    Polarization,
    Divergence,
    Consumption,
    ExportFigures,
}

pub const ALL_STAGES: [Stage; 12] = [
    Stage::Ingest,
    Stage::Segment,
    Stage::ExpandDict,
    Stage::WeakClassify,
    Stage::SampleAnnotation,
    Stage::ImportAnnotations,
    Stage::Train,
    Stage::Refine,
    Stage::Polarization,
    Stage::Divergence,
    Stage::Consumption,
    Stage::ExportFigures,
];

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Segment => "segment",
            Stage::ExpandDict => "expand-dict",
            Stage::WeakClassify => "weak-classify",
            Stage::SampleAnnotation => "sample-annotation",
            Stage::ImportAnnotations => "import-annotations",
            Stage::Train => "train",
            Stage::Refine => "refine",
            Stage::Polarization => "polarization",
            Stage::Divergence => "divergence",
            Stage::Consumption => "consumption",
            Stage::ExportFigures => "export-figures",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        ALL_STAGES.iter().copied().find(|s| s.name() == name)
    }

    pub fn deps(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Ingest | Consumption => &[],
            Segment => &[Ingest],
            ExpandDict => &[Segment],
            WeakClassify => &[Segment, ExpandDict],
            SampleAnnotation => &[Segment, WeakClassify],
            ImportAnnotations => &[SampleAnnotation],
            Train => &[Segment, WeakClassify, SampleAnnotation, ImportAnnotations],
            Refine => &[Segment, WeakClassify, Train],
            Polarization | Divergence => &[Segment, Refine],
            ExportFigures => &[Polarization, Divergence, Consumption],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Cached,
    Ran,
}

pub const TASKS_FILE: &str = "tasks.jsonl";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedCell {
    pub station: StationId,
    pub topic: String,
    pub model: crate::classify::BinaryClassifier,
    pub report: crate::classify::CvReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModels {
    pub vocab_hash: String,
    pub feature_keys: Vec<PhraseKey>,
    pub cells: Vec<TrainedCell>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinedCell {
    pub station: StationId,
    pub topic: String,
    pub weak: Vec<usize>,
    pub refined: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinedSets {
    pub cells: Vec<RefinedCell>,
    pub summary: crate::classify::RefineSummary,
}

impl RefinedSets {
    pub fn refined(&self) -> BTreeMap<Cell, Vec<usize>> {
        self.cells
            .iter()
            .map(|c| ((c.station.clone(), c.topic.clone()), c.refined.clone()))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct WeakSummaryRow {
    station: StationId,
    topic: String,
    size: usize,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    hash: String,
    store: Store,
    exec: Exec,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, exec: Exec) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        let store = Store::new(cfg.paths.work_dir.clone());
        Ok(Pipeline { cfg, hash, store, exec })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    /// Every stage in dependency order; stops at the first failure.
    pub fn run_all(&self) -> Result<Vec<(Stage, Outcome)>> {
        ALL_STAGES.iter().map(|&s| self.run(s).map(|o| (s, o))).collect()
    }

    pub fn run(&self, stage: Stage) -> Result<Outcome> {
        let inputs = self.inputs(stage)?;
        if self.store.is_fresh(stage.name(), &self.hash, &inputs)? {
            info!("{stage}: up to date");
            return Ok(Outcome::Cached);
        }
        info!("{stage}: running");
        self.store.invalidate(stage.name())?;
        let outputs = self.compute(stage)?;
        self.store.commit(stage.name(), &self.hash, inputs, &outputs)?;
        Ok(Outcome::Ran)
    }

    fn external(&self, what: &str, path: &Path) -> Result<Digest256> {
        if !path.exists() {
            return Err(Error::MissingInput {
                what: what.to_string(),
                path: path.to_path_buf(),
            });
        }
        Ok(Digest256 {
            name: what.to_string(),
            sha256: sha256_file(path)?,
        })
    }

    /// Upstream fingerprints plus digests of the external files a stage reads.
    fn inputs(&self, stage: Stage) -> Result<Vec<Digest256>> {
        let mut out = Vec::new();
        for dep in stage.deps() {
            let meta = self.store.require(dep.name(), &self.hash)?;
            out.push(Digest256 {
                name: dep.name().to_string(),
                sha256: meta.fingerprint(),
            });
        }
        let p = &self.cfg.paths;
        match stage {
            Stage::Ingest => out.push(self.external("episodes", &p.episodes)?),
            Stage::ExpandDict | Stage::WeakClassify => {
                if stage == Stage::ExpandDict {
                    if let Some(r) = &p.review {
                        out.push(self.external("review", r)?);
                    }
                }
                if self.cfg.oracle.kind == OracleKind::File {
                    let path = p.predictions.as_ref().expect("validated");
                    out.push(self.external("predictions", path)?);
                }
            }
            Stage::ImportAnnotations => {
                if !p.annotations.exists() {
                    return Err(Error::MissingDependency {
                        stage: "serve-annotation".into(),
                        artifact: p.annotations.display().to_string(),
                    });
                }
                out.push(self.external("annotations", &p.annotations)?);
            }
            Stage::Consumption => out.push(self.external("panel", &p.panel)?),
            _ => {}
        }
        Ok(out)
    }

    fn out(&self, stage: Stage, file: &str) -> PathBuf {
        self.store.path(stage.name(), file)
    }

    fn compute(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Segment => self.segment(),
            Stage::ExpandDict => self.expand_dict(),
            Stage::WeakClassify => self.weak_classify(),
            Stage::SampleAnnotation => self.sample_annotation(),
            Stage::ImportAnnotations => self.import_annotations(),
            Stage::Train => self.train(),
            Stage::Refine => self.refine(),
            Stage::Polarization => {
                let corpus = self.load_corpus()?;
                let refined = self.load_refined()?;
                let out = polarization_outputs(&corpus, &refined.refined(), &self.cfg, self.exec)?;
                let path = self.out(stage, "polarization.json");
                write_json(&path, &out)?;
                Ok(vec![path])
            }
            Stage::Divergence => {
                let corpus = self.load_corpus()?;
                let refined = self.load_refined()?;
                let out = divergence_outputs(&corpus, &refined.refined(), &self.cfg)?;
                let path = self.out(stage, "divergence.json");
                write_json(&path, &out)?;
                Ok(vec![path])
            }
            Stage::Consumption => {
                let (panel, report) = load_panel(&self.cfg.paths.panel, &self.cfg.registry())?;
                if !report.rejected.is_empty() {
                    warn!("panel: {} records rejected", report.rejected.len());
                }
                let out = consumption_outputs(&panel, report, &self.cfg)?;
                let path = self.out(stage, "consumption.json");
                write_json(&path, &out)?;
                Ok(vec![path])
            }
            Stage::ExportFigures => self.export_figures(),
        }
    }

    fn ingest(&self) -> Result<Vec<PathBuf>> {
        let (episodes, report) = ingest_episodes(&self.cfg.paths.episodes, &self.cfg.registry())?;
        for issue in &report.rejected {
            warn!("episodes line {}: {}", issue.line, issue.reason);
        }
        if episodes.is_empty() {
            return Err(Error::Validation("no valid episodes".into()));
        }
        let data = self.out(Stage::Ingest, "episodes.bin");
        let rep = self.out(Stage::Ingest, "report.json");
        write_bin(&data, &episodes)?;
        write_json(&rep, &report)?;
        Ok(vec![data, rep])
    }

    pub fn load_episodes(&self) -> Result<(Vec<Episode>, IngestReport)> {
        self.store.require(Stage::Ingest.name(), &self.hash)?;
        Ok((read_bin(&self.out(Stage::Ingest, "episodes.bin"))?, read_json(&self.out(Stage::Ingest, "report.json"))?))
    }

    fn segment(&self) -> Result<Vec<PathBuf>> {
        let (episodes, _) = self.load_episodes()?;
        let c = &self.cfg.corpus;
        let corpus = build_corpus(
            &episodes,
            c.max_words,
            c.stopwords.iter().map(String::as_str),
            self.cfg.confounder_phrases(),
            &self.hash,
            self.exec,
        );
        info!("segment: {} segments from {} episodes", corpus.len(), episodes.len());
        let path = self.out(Stage::Segment, "corpus.bin");
        write_atomic(&path, &corpus.to_bytes()?)?;
        Ok(vec![path])
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        self.store.require(Stage::Segment.name(), &self.hash)?;
        let corpus = Corpus::load(&self.out(Stage::Segment, "corpus.bin"))?;
        if corpus.config_hash != self.hash {
            return Err(Error::StaleArtifact {
                stage: Stage::Segment.name().into(),
                artifact: "corpus.bin".into(),
                found: corpus.config_hash,
                expected: self.hash.clone(),
            });
        }
        Ok(corpus)
    }

    pub fn oracle(&self, corpus: &Corpus) -> Result<Box<dyn ReplacementOracle>> {
        Ok(match self.cfg.oracle.kind {
            OracleKind::Distributional => {
                let stop = layers::stopword_ids(corpus, &self.cfg.corpus.stopwords);
                Box::new(distributional_oracle(corpus, &stop, &self.cfg.oracle.distributional))
            }
            OracleKind::File => Box::new(FileOracle::load(self.cfg.paths.predictions.as_ref().expect("validated"))?),
        })
    }

    fn expand_dict(&self) -> Result<Vec<PathBuf>> {
        let corpus = self.load_corpus()?;
        let registry = self.cfg.topic_registry()?;
        let reviews: Vec<ReviewDecision> = match &self.cfg.paths.review {
            Some(p) => read_jsonl(p)?,
            None => Vec::new(),
        };
        let oracle = self.oracle(&corpus)?;
        let w = &self.cfg.weak;
        let dicts = layers::expand_dictionaries(&corpus, &registry, oracle.as_ref(), w.top_k, w.vocab_cap, &reviews, self.exec)?;
        let path = self.out(Stage::ExpandDict, "dictionaries.jsonl");
        write_jsonl(&path, &dicts)?;
        Ok(vec![path])
    }

    pub fn load_dictionaries(&self) -> Result<Vec<DictionaryRecord>> {
        self.store.require(Stage::ExpandDict.name(), &self.hash)?;
        let dicts: Vec<DictionaryRecord> = read_jsonl(&self.out(Stage::ExpandDict, "dictionaries.jsonl"))?;
        for d in &dicts {
            d.validate()?;
        }
        Ok(dicts)
    }

    fn weak_classify(&self) -> Result<Vec<PathBuf>> {
        let corpus = self.load_corpus()?;
        let dicts = self.load_dictionaries()?;
        let oracle = self.oracle(&corpus)?;
        let compiled = CompiledDictionaries::compile(
            &dicts.iter().map(DictionaryRecord::dictionary).collect::<Vec<_>>(),
            oracle.vocabulary(),
        )?;
        let w = &self.cfg.weak;
        let labels = weak_classify_corpus(&corpus, &compiled, oracle.as_ref(), w.top_k, w.threshold, self.exec);
        let registry = self.cfg.topic_registry()?;
        let summary: Vec<WeakSummaryRow> = layers::weak_sets(&corpus, &labels, &registry)
            .into_iter()
            .map(|((station, topic), m)| WeakSummaryRow { station, topic, size: m.len() })
            .collect();
        let data = self.out(Stage::WeakClassify, "weak_labels.bin");
        let sum = self.out(Stage::WeakClassify, "summary.json");
        write_bin(&data, &labels)?;
        write_json(&sum, &summary)?;
        Ok(vec![data, sum])
    }

    pub fn load_weak(&self) -> Result<Vec<WeakLabel>> {
        self.store.require(Stage::WeakClassify.name(), &self.hash)?;
        read_bin(&self.out(Stage::WeakClassify, "weak_labels.bin"))
    }

    fn sample_annotation(&self) -> Result<Vec<PathBuf>> {
        let corpus = self.load_corpus()?;
        let labels = self.load_weak()?;
        let registry = self.cfg.topic_registry()?;
        let tasks = sample_tasks(&corpus, &labels, &registry, self.cfg.annotation.per_cell, self.cfg.seed)?;
        info!("sample-annotation: {} tasks", tasks.len());
        let path = self.out(Stage::SampleAnnotation, TASKS_FILE);
        write_jsonl(&path, &tasks)?;
        Ok(vec![path])
    }

    pub fn load_tasks(&self) -> Result<Vec<AnnotationTask>> {
        self.store.require(Stage::SampleAnnotation.name(), &self.hash)?;
        load_tasks(&self.out(Stage::SampleAnnotation, TASKS_FILE))
    }

    fn import_annotations(&self) -> Result<Vec<PathBuf>> {
        let tasks = self.load_tasks()?;
        let report = import_records(&self.cfg.paths.annotations, &tasks)?;
        for r in &report.rejected {
            warn!("annotations line {}: {}", r.line, r.reason);
        }
        let a = &self.cfg.annotation;
        let labels = aggregate(&tasks, &report.records, a.min_annotators, a.max_annotators)?;
        let data = self.out(Stage::ImportAnnotations, "ground_truth.json");
        let rep = self.out(Stage::ImportAnnotations, "import_report.json");
        write_json(&data, &labels)?;
        write_json(
            &rep,
            &serde_json::json!({ "accepted": report.records.len(), "rejected": report.rejected }),
        )?;
        Ok(vec![data, rep])
    }

    pub fn load_ground_truth(&self) -> Result<Vec<GroundTruthLabel>> {
        self.store.require(Stage::ImportAnnotations.name(), &self.hash)?;
        read_json(&self.out(Stage::ImportAnnotations, "ground_truth.json"))
    }

    fn train(&self) -> Result<Vec<PathBuf>> {
        let corpus = self.load_corpus()?;
        let labels = self.load_weak()?;
        let tasks = self.load_tasks()?;
        let truth = self.load_ground_truth()?;
        let registry = self.cfg.topic_registry()?;
        let weak = layers::weak_sets(&corpus, &labels, &registry);
        let sets = layers::training_sets(&corpus, &tasks, &truth, &weak)?;
        let (space, models) = layers::train_cells(&corpus, &sets, &weak, self.cfg.train.min_df, &self.cfg.train_config(), self.exec)?;
        let degenerate = models.values().filter(|(_, r)| r.degenerate).count();
        if degenerate > 0 {
            warn!("train: {degenerate} cells use a constant model");
        }
        let out = TrainedModels {
            vocab_hash: space.hash().to_string(),
            feature_keys: space.keys().to_vec(),
            cells: models
                .into_iter()
                .map(|((station, topic), (model, report))| TrainedCell { station, topic, model, report })
                .collect(),
        };
        let path = self.out(Stage::Train, "models.json");
        write_json(&path, &out)?;
        Ok(vec![path])
    }

    pub fn load_models(&self, corpus: &Corpus) -> Result<(FeatureSpace, Models)> {
        self.store.require(Stage::Train.name(), &self.hash)?;
        let t: TrainedModels = read_json(&self.out(Stage::Train, "models.json"))?;
        let space = FeatureSpace::from_keys(t.feature_keys, &corpus.lexicon);
        if space.hash() != t.vocab_hash {
            return Err(Error::Validation("feature space does not match the trained models".into()));
        }
        let models = t
            .cells
            .into_iter()
            .map(|c| ((c.station, c.topic), (c.model, c.report)))
            .collect();
        Ok((space, models))
    }

    fn refine(&self) -> Result<Vec<PathBuf>> {
        let corpus = self.load_corpus()?;
        let labels = self.load_weak()?;
        let registry = self.cfg.topic_registry()?;
        let weak = layers::weak_sets(&corpus, &labels, &registry);
        let (space, models) = self.load_models(&corpus)?;
        let (refined, summary) = layers::refine_cells(&corpus, &weak, &models, &space)?;
        info!(
            "refine: mean cv precision {:.4} (sd {:.4})",
            summary.mean_precision, summary.sd_precision
        );
        let cells = weak
            .into_iter()
            .map(|(cell, w)| RefinedCell {
                refined: refined.get(&cell).cloned().unwrap_or_default(),
                station: cell.0,
                topic: cell.1,
                weak: w,
            })
            .collect();
        let path = self.out(Stage::Refine, "refined.json");
        write_json(&path, &RefinedSets { cells, summary })?;
        Ok(vec![path])
    }

    pub fn load_refined(&self) -> Result<RefinedSets> {
        self.store.require(Stage::Refine.name(), &self.hash)?;
        read_json(&self.out(Stage::Refine, "refined.json"))
    }

    fn export_figures(&self) -> Result<Vec<PathBuf>> {
        let pol: PolarizationOutput = read_json(&self.out(Stage::Polarization, "polarization.json"))?;
        let div: DivergenceOutput = read_json(&self.out(Stage::Divergence, "divergence.json"))?;
        let con: ConsumptionOutput = read_json(&self.out(Stage::Consumption, "consumption.json"))?;
        let mut inputs = Vec::new();
        for s in Stage::ExportFigures.deps() {
            inputs.push((s.name().to_string(), self.store.require(s.name(), &self.hash)?.fingerprint()));
        }
        let header = ExportHeader {
            config_hash: self.hash.clone(),
            format_version: FORMAT_VERSION,
            stage_inputs: inputs,
            smoothing_days: self.cfg.export.smoothing_days,
        };
        write_figures(&self.cfg.paths.export_dir, &header, &pol, &div, &con)
    }

    pub fn figure_paths(&self) -> Vec<PathBuf> {
        FIGURE_FILES.iter().map(|f| self.cfg.paths.export_dir.join(f)).collect()
    }

    /// Segments of a refined topic set, for filters.
    pub fn topic_members(refined: &BTreeMap<Cell, Vec<usize>>, topic: &str) -> HashSet<usize> {
        refined
            .iter()
            .filter(|((_, t), _)| t == topic)
            .flat_map(|(_, m)| m.iter().copied())
            .collect()
    }
}
