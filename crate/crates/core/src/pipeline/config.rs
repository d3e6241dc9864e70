use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::{DEFAULT_ANNOTATOR_CAP, DEFAULT_MIN_ANNOTATORS, DEFAULT_PER_CELL};
use crate::classify::TrainConfig;
use crate::corpus::{StationRegistry, DEFAULT_MAX_WORDS};
use crate::error::{Error, Result};
use crate::metrics::{ShareAggregation, DEFAULT_MIN_MINUTES};
use crate::polarize::{RhoNormalization, ZeroDenominator};
use crate::weaksup::{
    DistributionalConfig, TopicLabel, TopicRegistry, DEFAULT_OVERLAP_THRESHOLD, DEFAULT_TOP_K, DEFAULT_VOCAB_CAP,
};
use crate::window::Window;

/// Relative paths resolve against the directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub episodes: PathBuf,
    pub panel: PathBuf,
    /// Reviewer decisions for the expanded dictionaries; optional.
    #[serde(default)]
    pub review: Option<PathBuf>,
    /// Annotation records, appended to by `serve-annotation`.
    pub annotations: PathBuf,
    /// Precomputed replacement predictions for the file oracle.
    #[serde(default)]
    pub predictions: Option<PathBuf>,
    /// Planted truth of a synthetic corpus; used only by the simulators.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    pub work_dir: PathBuf,
    pub export_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub max_words: usize,
    pub extra_stations: Vec<String>,
    pub stopwords: Vec<String>,
    /// Station code -> program and host names removed before counting.
    pub confounders: BTreeMap<String, Vec<String>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            max_words: DEFAULT_MAX_WORDS,
            extra_stations: Vec::new(),
            stopwords: Vec::new(),
            confounders: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    Distributional,
    File,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub distributional: DistributionalConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakConfig {
    pub top_k: usize,
    pub vocab_cap: usize,
    pub threshold: f64,
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            top_k: DEFAULT_TOP_K,
            vocab_cap: DEFAULT_VOCAB_CAP,
            threshold: DEFAULT_OVERLAP_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationConfig {
    pub per_cell: usize,
    pub min_annotators: usize,
    pub max_annotators: usize,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig {
            per_cell: DEFAULT_PER_CELL,
            min_annotators: DEFAULT_MIN_ANNOTATORS,
            max_annotators: DEFAULT_ANNOTATOR_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub folds: usize,
    pub grid: Vec<f64>,
    pub max_iter: usize,
    pub min_df: u32,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            folds: t.folds,
            grid: t.grid,
            max_iter: t.max_iter,
            min_df: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarizationConfig {
    pub window: Window,
    pub eras: Window,
    pub normalization: RhoNormalization,
    pub zero_denominator: ZeroDenominator,
}

impl Default for PolarizationConfig {
    fn default() -> Self {
        PolarizationConfig {
            window: Window::Quarterly,
            eras: Window::election_eras(),
            normalization: RhoNormalization::default(),
            zero_denominator: ZeroDenominator::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivergenceConfig {
    pub window: Window,
    pub aggregation: ShareAggregation,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig {
            window: Window::Quarterly,
            aggregation: ShareAggregation::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsumptionConfig {
    pub min_minutes: u32,
    pub thresholds: Vec<f64>,
}

impl Default for ConsumptionConfig {
    fn default() -> Self {
        ConsumptionConfig {
            min_minutes: DEFAULT_MIN_MINUTES,
            thresholds: vec![0.5, 0.75],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    /// Centered rolling mean over this many days for the time-series
    /// figures; 1 disables smoothing.
    pub smoothing_days: u32,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig { smoothing_days: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core, 1 runs sequentially. Not part of
    /// the config hash since results do not depend on it.
    #[serde(default)]
    pub jobs: usize,
    pub paths: Paths,
    pub topics: Vec<TopicLabel>,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub weak: WeakConfig,
    #[serde(default)]
    pub annotation: AnnotationConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub polarization: PolarizationConfig,
    #[serde(default)]
    pub divergence: DivergenceConfig,
    #[serde(default)]
    pub consumption: ConsumptionConfig,
    #[serde(default)]
    pub export: ExportConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file and anchors relative paths at its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.resolve(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        TopicRegistry::new(self.topics.clone())?;
        let bad = |m: String| Err(Error::Config(m));
        if self.corpus.max_words == 0 {
            return bad("corpus.max_words must be positive".into());
        }
        let reg = self.registry();
        if let Some(s) = self.corpus.confounders.keys().find(|s| reg.parse(s).is_none()) {
            return bad(format!("confounders listed for unknown station `{s}`"));
        }
        if self.weak.top_k == 0 || self.weak.vocab_cap == 0 {
            return bad("weak.top_k and weak.vocab_cap must be positive".into());
        }
        if !(self.weak.threshold > 0.0 && self.weak.threshold <= 1.0) {
            return bad(format!("weak.threshold {} outside (0, 1]", self.weak.threshold));
        }
        let a = &self.annotation;
        if a.per_cell == 0 || a.min_annotators == 0 || a.max_annotators < a.min_annotators {
            return bad("annotation needs per_cell > 0 and max_annotators >= min_annotators > 0".into());
        }
        if self.train.folds < 2 || self.train.grid.is_empty() || self.train.grid.iter().any(|&l| !(l > 0.0)) {
            return bad("train needs at least 2 folds and a grid of positive values".into());
        }
        if self.consumption.thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return bad("consumption thresholds must lie in (0, 1]".into());
        }
        if self.export.smoothing_days == 0 {
            return bad("export.smoothing_days must be at least 1".into());
        }
        if self.oracle.kind == OracleKind::File && self.paths.predictions.is_none() {
            return bad("oracle.kind = \"file\" needs paths.predictions".into());
        }
        Ok(())
    }

    pub fn registry(&self) -> StationRegistry {
        StationRegistry::with_extra(self.corpus.extra_stations.iter().cloned())
    }

    pub fn topic_registry(&self) -> Result<TopicRegistry> {
        TopicRegistry::new(self.topics.clone())
    }

    pub fn confounder_phrases(&self) -> Vec<&str> {
        self.corpus.confounders.values().flatten().map(String::as_str).collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            folds: self.train.folds,
            grid: self.train.grid.clone(),
            seed: self.seed,
            max_iter: self.train.max_iter,
        }
    }

    /// sha256 over the canonical JSON form, with `jobs` and the paths
    /// zeroed out: neither changes results, and input files are tracked
    /// by content hash instead.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.jobs = 0;
        canon.paths = Paths {
            episodes: PathBuf::new(),
            panel: PathBuf::new(),
            review: None,
            annotations: PathBuf::new(),
            predictions: None,
            truth: None,
            work_dir: PathBuf::new(),
            export_dir: PathBuf::new(),
        };
        let json = serde_json::to_vec(&canon).expect("config serializes");
        format!("{:x}", Sha256::digest(&json))
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.episodes);
        fix(&mut self.panel);
        fix(&mut self.annotations);
        fix(&mut self.work_dir);
        fix(&mut self.export_dir);
        for p in [&mut self.review, &mut self.predictions, &mut self.truth].into_iter().flatten() {
            fix(p);
        }
    }
}
