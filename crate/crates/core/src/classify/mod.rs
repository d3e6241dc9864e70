//! Layer-2 supervised refinement: one binary classifier per
//! (station, topic) cell over phrase frequencies, chosen by cross-validated
//! F1, then applied to the cell's weakly labeled candidates.

pub mod logistic;

use std::collections::{BTreeMap, HashMap};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Lexicon, PhraseKey, PhraseVector, StationId};
use crate::error::{Error, Result};

use logistic::{fit, sigmoid, DescentOptions, Problem, SparseRow};

pub const DECISION_THRESHOLD: f64 = 0.5;

/// Frozen phrase index shared by every model of a run.
#[derive(Clone, Debug)]
pub struct FeatureSpace {
    keys: Vec<PhraseKey>,
    index: HashMap<PhraseKey, u32>,
    hash: String,
}

impl FeatureSpace {
    /// Phrases occurring in at least `min_df` of the given vectors.
    pub fn build<'a>(
        vectors: impl IntoIterator<Item = &'a PhraseVector>,
        min_df: u32,
        lexicon: &Lexicon,
    ) -> Self {
        let mut df: HashMap<PhraseKey, u32> = HashMap::new();
        for v in vectors {
            for &(k, _) in v.entries() {
                *df.entry(k).or_default() += 1;
            }
        }
        let mut keys: Vec<PhraseKey> = df
            .into_iter()
            .filter(|&(_, d)| d >= min_df.max(1))
            .map(|(k, _)| k)
            .collect();
        keys.sort_unstable();
        Self::from_keys(keys, lexicon)
    }

    pub fn from_keys(keys: Vec<PhraseKey>, lexicon: &Lexicon) -> Self {
        let mut hasher = Sha256::new();
        for k in &keys {
            hasher.update(k.render(lexicon).as_bytes());
            hasher.update(b"\n");
        }
        let hash = format!("{:x}", hasher.finalize());
        let index = keys.iter().enumerate().map(|(i, &k)| (k, i as u32)).collect();
        FeatureSpace { keys, index, hash }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn keys(&self) -> &[PhraseKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Phrase frequencies `c / m` restricted to the feature space. `m` counts
/// every phrase of the segment, so dropped phrases lower the norm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn featurize(phrases: &PhraseVector, space: &FeatureSpace) -> FeatureVector {
    let m = phrases.total();
    let mut pairs: Vec<(u32, f64)> = phrases
        .entries()
        .iter()
        .filter_map(|&(k, c)| space.index.get(&k).map(|&i| (i, c as f64 / m as f64)))
        .collect();
    pairs.sort_unstable_by_key(|p| p.0);
    let (indices, values) = pairs.into_iter().unzip();
    FeatureVector { indices, values }
}

/// Fold assignment per sample: shuffled positives then shuffled negatives
/// dealt round robin, so folds are stratified and differ in size by at
/// most one.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignment = vec![0; labels.len()];
    for (slot, i) in pos.into_iter().chain(neg).enumerate() {
        assignment[i] = slot % folds;
    }
    assignment
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// Undefined ratios are reported as 0.
    pub fn from_predictions(truth: &[bool], predicted: &[bool]) -> Self {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fneg = 0.0;
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fneg += 1.0,
                _ => {}
            }
        }
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        Metrics {
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub lambda: f64,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub n_positive: usize,
    pub n_negative: usize,
    pub grid: Vec<GridScore>,
    pub selected_lambda: f64,
    /// Per-fold metrics at the selected grid point.
    pub folds: Vec<Metrics>,
    pub mean_precision: f64,
    pub sd_precision: f64,
    /// Out-of-fold metrics at alternative decision thresholds.
    pub threshold_sweep: Vec<ThresholdMetrics>,
    /// True when the cell could not be trained and a constant model stands in.
    #[serde(default)]
    pub degenerate: bool,
}

impl CvReport {
    /// Report for a cell that stands in with a constant model.
    pub fn degenerate(n_positive: usize, n_negative: usize) -> Self {
        CvReport {
            n_positive,
            n_negative,
            grid: Vec::new(),
            selected_lambda: 0.0,
            folds: Vec::new(),
            mean_precision: 0.0,
            sd_precision: 0.0,
            threshold_sweep: Vec::new(),
            degenerate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub folds: usize,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            folds: 5,
            grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1],
            seed: 0,
            max_iter: DescentOptions::default().max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassifier {
    pub station: StationId,
    pub topic: String,
    pub vocab_hash: String,
    /// (feature index, weight), nonzero entries by index.
    pub weights: Vec<(u32, f64)>,
    pub bias: f64,
    pub lambda: f64,
}

impl BinaryClassifier {
    /// Model that predicts the same class for every input.
    pub fn constant(station: StationId, topic: &str, vocab_hash: &str, positive: bool) -> Self {
        BinaryClassifier {
            station,
            topic: topic.to_string(),
            vocab_hash: vocab_hash.to_string(),
            weights: Vec::new(),
            bias: if positive { 30.0 } else { -30.0 },
            lambda: 0.0,
        }
    }

    fn margin(&self, x: &FeatureVector) -> f64 {
        margin(&self.weights, self.bias, x)
    }
}

/// `w·x + b` over two index-sorted sparse vectors.
fn margin(weights: &[(u32, f64)], bias: f64, x: &FeatureVector) -> f64 {
    let mut z = bias;
    let (mut i, mut j) = (0, 0);
    while i < weights.len() && j < x.indices.len() {
        match weights[i].0.cmp(&x.indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                z += weights[i].1 * x.values[j];
                i += 1;
                j += 1;
            }
        }
    }
    z
}

/// Compacts the features used by a sample set into a local index space.
struct LocalSpace {
    global: Vec<u32>,
    rows: Vec<SparseRow>,
}

impl LocalSpace {
    fn new(samples: &[&FeatureVector]) -> Self {
        let mut global: Vec<u32> = samples.iter().flat_map(|s| s.indices.iter().copied()).collect();
        global.sort_unstable();
        global.dedup();
        let local: HashMap<u32, u32> = global.iter().enumerate().map(|(l, &g)| (g, l as u32)).collect();
        let rows = samples
            .iter()
            .map(|s| SparseRow {
                indices: s.indices.iter().map(|g| local[g]).collect(),
                values: s.values.clone(),
            })
            .collect();
        LocalSpace { global, rows }
    }
}

fn fit_local(samples: &[&FeatureVector], labels: &[bool], lambda: f64, max_iter: usize) -> (Vec<(u32, f64)>, f64) {
    let space = LocalSpace::new(samples);
    let problem = Problem {
        rows: &space.rows,
        labels,
        dim: space.global.len(),
        lambda,
    };
    let opts = DescentOptions {
        max_iter,
        ..DescentOptions::default()
    };
    let (w, b) = fit(&problem, &opts);
    let weights = space
        .global
        .iter()
        .zip(w)
        .filter(|(_, v)| *v != 0.0)
        .map(|(&g, v)| (g, v))
        .collect();
    (weights, b)
}

fn probability(weights: &[(u32, f64)], bias: f64, x: &FeatureVector) -> f64 {
    sigmoid(margin(weights, bias, x))
}

/// Grid search by mean k-fold F1, then a refit on all samples at the
/// winning regularization strength.
pub fn train(
    station: &StationId,
    topic: &str,
    samples: &[FeatureVector],
    labels: &[bool],
    vocab_hash: &str,
    config: &TrainConfig,
) -> Result<(BinaryClassifier, CvReport)> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos < 2 || n_neg < 2 {
        return Err(Error::InsufficientData(format!(
            "cell ({station}, {topic}): need at least 2 samples per class, have {n_pos} positive and {n_neg} negative"
        )));
    }
    if config.folds < 2 || config.grid.is_empty() {
        return Err(Error::InvalidArgument("need at least 2 folds and one grid point".into()));
    }
    let assignment = stratified_folds(labels, config.folds, config.seed);

    let mut grid = Vec::with_capacity(config.grid.len());
    let mut oof_by_grid: Vec<Vec<f64>> = Vec::new();
    for &lambda in &config.grid {
        let mut oof = vec![0.0; samples.len()];
        let mut fold_f1 = Vec::with_capacity(config.folds);
        for fold in 0..config.folds {
            let (train_x, train_y): (Vec<&FeatureVector>, Vec<bool>) = (0..samples.len())
                .filter(|&i| assignment[i] != fold)
                .map(|i| (&samples[i], labels[i]))
                .unzip();
            let (w, b) = fit_local(&train_x, &train_y, lambda, config.max_iter);
            let held: Vec<usize> = (0..samples.len()).filter(|&i| assignment[i] == fold).collect();
            for &i in &held {
                oof[i] = probability(&w, b, &samples[i]);
            }
            let truth: Vec<bool> = held.iter().map(|&i| labels[i]).collect();
            let pred: Vec<bool> = held.iter().map(|&i| oof[i] >= DECISION_THRESHOLD).collect();
            fold_f1.push(Metrics::from_predictions(&truth, &pred).f1);
        }
        let mean_f1 = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
        grid.push(GridScore { lambda, fold_f1, mean_f1 });
        oof_by_grid.push(oof);
    }

    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if g.mean_f1 > grid[best].mean_f1 {
            best = i;
        }
    }
    let lambda = grid[best].lambda;
    let oof = &oof_by_grid[best];

    let folds: Vec<Metrics> = (0..config.folds)
        .map(|fold| {
            let held: Vec<usize> = (0..samples.len()).filter(|&i| assignment[i] == fold).collect();
            let truth: Vec<bool> = held.iter().map(|&i| labels[i]).collect();
            let pred: Vec<bool> = held.iter().map(|&i| oof[i] >= DECISION_THRESHOLD).collect();
            Metrics::from_predictions(&truth, &pred)
        })
        .collect();
    let mean_precision = folds.iter().map(|m| m.precision).sum::<f64>() / folds.len() as f64;
    let sd_precision = (folds
        .iter()
        .map(|m| (m.precision - mean_precision).powi(2))
        .sum::<f64>()
        / (folds.len() - 1) as f64)
        .sqrt();
    let threshold_sweep = [0.3, 0.4, 0.5, 0.6, 0.7]
        .iter()
        .map(|&t| ThresholdMetrics {
            threshold: t,
            metrics: Metrics::from_predictions(labels, &oof.iter().map(|&p| p >= t).collect::<Vec<_>>()),
        })
        .collect();

    let all: Vec<&FeatureVector> = samples.iter().collect();
    let (weights, bias) = fit_local(&all, labels, lambda, config.max_iter);
    let model = BinaryClassifier {
        station: station.clone(),
        topic: topic.to_string(),
        vocab_hash: vocab_hash.to_string(),
        weights,
        bias,
        lambda,
    };
    let report = CvReport {
        n_positive: n_pos,
        n_negative: n_neg,
        grid,
        selected_lambda: lambda,
        folds,
        mean_precision,
        sd_precision,
        threshold_sweep,
        degenerate: false,
    };
    Ok((model, report))
}

/// Like [`train`], but a cell with fewer than two samples of either class
/// gets a constant model voting for its majority class (positive on ties).
pub fn train_or_constant(
    station: &StationId,
    topic: &str,
    samples: &[FeatureVector],
    labels: &[bool],
    vocab_hash: &str,
    config: &TrainConfig,
) -> Result<(BinaryClassifier, CvReport)> {
    match train(station, topic, samples, labels, vocab_hash, config) {
        Err(Error::InsufficientData(reason)) => {
            warn!("{reason}; using a constant model");
            let n_pos = labels.iter().filter(|&&y| y).count();
            let n_neg = labels.len() - n_pos;
            Ok((
                BinaryClassifier::constant(station.clone(), topic, vocab_hash, n_pos >= n_neg),
                CvReport::degenerate(n_pos, n_neg),
            ))
        }
        other => other,
    }
}

pub fn predict(model: &BinaryClassifier, x: &FeatureVector, vocab_hash: &str) -> Result<(f64, bool)> {
    if model.vocab_hash != vocab_hash {
        return Err(Error::Validation(format!(
            "model ({}, {}) was trained on feature space {}, not {vocab_hash}",
            model.station, model.topic, model.vocab_hash
        )));
    }
    let p = sigmoid(model.margin(x));
    Ok((p, p >= DECISION_THRESHOLD))
}

pub type Cell = (StationId, String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub station: StationId,
    pub topic: String,
    pub weak_size: usize,
    pub refined_size: usize,
    pub cv_precision: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineSummary {
    pub cells: Vec<CellSummary>,
    pub mean_precision: f64,
    pub sd_precision: f64,
}

/// Keeps the members of each weak set that its cell's model accepts.
/// `features(i)` featurizes corpus segment `i`.
pub fn refine(
    weak_sets: &BTreeMap<Cell, Vec<usize>>,
    models: &BTreeMap<Cell, (BinaryClassifier, CvReport)>,
    vocab_hash: &str,
    features: impl Fn(usize) -> FeatureVector,
) -> Result<(BTreeMap<Cell, Vec<usize>>, RefineSummary)> {
    let mut refined = BTreeMap::new();
    let mut cells = Vec::new();
    for (cell, members) in weak_sets {
        if members.is_empty() {
            refined.insert(cell.clone(), Vec::new());
            continue;
        }
        let (model, report) = models.get(cell).ok_or_else(|| {
            Error::Validation(format!("no model for populated cell ({}, {})", cell.0, cell.1))
        })?;
        let mut kept = Vec::new();
        for &i in members {
            if predict(model, &features(i), vocab_hash)?.1 {
                kept.push(i);
            }
        }
        if kept.is_empty() {
            warn!("cell ({}, {}): model rejected every candidate", cell.0, cell.1);
        }
        cells.push(CellSummary {
            station: cell.0.clone(),
            topic: cell.1.clone(),
            weak_size: members.len(),
            refined_size: kept.len(),
            cv_precision: (!report.degenerate).then_some(report.mean_precision),
        });
        refined.insert(cell.clone(), kept);
    }
    let precisions: Vec<f64> = cells.iter().filter_map(|c| c.cv_precision).collect();
    let (mean_precision, sd_precision) = mean_sd(&precisions);
    Ok((
        refined,
        RefineSummary {
            cells,
            mean_precision,
            sd_precision,
        },
    ))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}
