//! The two classification layers wired together: dictionary expansion,
//! weak labeling, assembly of the annotated training sets, per-cell
//! training and refinement.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use log::info;

use crate::annotation::{AnnotationTask, Choice, GroundTruthLabel, LabelStatus};
use crate::classify::{featurize, refine, train_or_constant, BinaryClassifier, Cell, CvReport, FeatureSpace, RefineSummary, TrainConfig};
use crate::corpus::{Corpus, StationId, TokenId};
use crate::error::{Error, Result};
use crate::fixture::fxhash;
use crate::weaksup::{
    build_class_vocabulary, collect_replacements, review_vocabulary, DictionaryRecord, ReplacementOracle,
    ReviewDecision, TopicRegistry, WeakLabel,
};
use crate::Exec;

pub fn stopword_ids(corpus: &Corpus, stopwords: &[String]) -> HashSet<TokenId> {
    stopwords.iter().filter_map(|w| corpus.lexicon.get(w)).collect()
}

/// Replacement lists at every label-word occurrence, ranked into a capped
/// class vocabulary per topic, then filtered by the reviewer's decisions.
pub fn expand_dictionaries(
    corpus: &Corpus,
    registry: &TopicRegistry,
    oracle: &dyn ReplacementOracle,
    top_k: usize,
    cap: usize,
    reviews: &[ReviewDecision],
    exec: Exec,
) -> Result<Vec<DictionaryRecord>> {
    let by_topic: HashMap<&str, &ReviewDecision> = reviews.iter().map(|r| (r.topic_id.as_str(), r)).collect();
    if let Some(r) = reviews.iter().find(|r| registry.index_of(&r.topic_id).is_none()) {
        return Err(Error::Validation(format!("review names unknown topic `{}`", r.topic_id)));
    }
    let mut out = Vec::with_capacity(registry.len());
    for topic in registry.topics() {
        let lists = collect_replacements(corpus, topic, oracle, top_k, exec);
        let vocab = build_class_vocabulary(&topic.id, &lists, cap)?;
        let removals = by_topic.get(topic.id.as_str()).map(|r| r.removals(&vocab)).unwrap_or_default();
        let (dict, audit) = review_vocabulary(&vocab, &removals)?;
        info!(
            "topic {}: {} replacement lists, {} ranked words, {} removed",
            topic.id,
            lists.len(),
            vocab.ranked_words.len(),
            audit.removed.len()
        );
        out.push(DictionaryRecord::new(&vocab, &removals, &dict));
    }
    Ok(out)
}

/// Indices of weakly labeled segments per (station, topic). Every cell of
/// a station present in the corpus appears, empty or not.
pub fn weak_sets(corpus: &Corpus, labels: &[WeakLabel], registry: &TopicRegistry) -> BTreeMap<Cell, Vec<usize>> {
    let stations: BTreeSet<&StationId> = corpus.segments.iter().map(|s| &s.station).collect();
    let mut cells: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
    for s in &stations {
        for t in registry.ids() {
            cells.insert(((*s).clone(), t.to_string()), Vec::new());
        }
    }
    for (i, label) in labels.iter().enumerate() {
        let station = &corpus.segments[i].station;
        for t in label.topics() {
            if let Some(v) = cells.get_mut(&(station.clone(), t.to_string())) {
                v.push(i);
            }
        }
    }
    cells
}

/// Refined segment indices per topic, pooled over stations.
pub fn topic_sets(cells: &BTreeMap<Cell, Vec<usize>>) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for ((_, topic), members) in cells {
        out.entry(topic.clone()).or_default().extend(members);
    }
    for v in out.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    out
}

/// Labeled samples per cell: every annotated segment of the cell's weak
/// set whose task resolved, positive when some resolved label of that
/// segment is the cell's topic. Segments annotated for one topic can
/// thus train the cells of the other topics they were flagged for.
pub fn training_sets(
    corpus: &Corpus,
    tasks: &[AnnotationTask],
    labels: &[GroundTruthLabel],
    weak: &BTreeMap<Cell, Vec<usize>>,
) -> Result<BTreeMap<Cell, (Vec<usize>, Vec<bool>)>> {
    let index: HashMap<String, usize> = corpus.segment_ids().into_iter().enumerate().map(|(i, id)| (id, i)).collect();
    let by_task: HashMap<&str, &GroundTruthLabel> = labels.iter().map(|l| (l.task_id.as_str(), l)).collect();
    let mut resolved: BTreeMap<usize, BTreeSet<Choice>> = BTreeMap::new();
    for task in tasks {
        let &i = index
            .get(&task.segment_id)
            .ok_or_else(|| Error::Validation(format!("task `{}` names unknown segment", task.task_id)))?;
        if let Some(l) = by_task.get(task.task_id.as_str()) {
            if let (LabelStatus::Resolved, Some(c)) = (l.status, &l.label) {
                resolved.entry(i).or_default().insert(c.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    for (cell, members) in weak {
        let topic = Choice::Topic(cell.1.clone());
        let (idx, ys): (Vec<usize>, Vec<bool>) = members
            .iter()
            .filter_map(|i| resolved.get(i).map(|c| (*i, c.contains(&topic))))
            .unzip();
        out.insert(cell.clone(), (idx, ys));
    }
    Ok(out)
}

pub type Models = BTreeMap<Cell, (BinaryClassifier, CvReport)>;

/// Feature space over every annotated segment, then one model per cell
/// with a non-empty weak set. Cells lacking two samples of each class get
/// a constant model.
pub fn train_cells(
    corpus: &Corpus,
    sets: &BTreeMap<Cell, (Vec<usize>, Vec<bool>)>,
    weak: &BTreeMap<Cell, Vec<usize>>,
    min_df: u32,
    config: &TrainConfig,
    exec: Exec,
) -> Result<(FeatureSpace, Models)> {
    let annotated: BTreeSet<usize> = sets.values().flat_map(|(i, _)| i.iter().copied()).collect();
    let space = FeatureSpace::build(annotated.iter().map(|&i| &corpus.phrases[i]), min_df, &corpus.lexicon);
    let cells: Vec<(&Cell, &(Vec<usize>, Vec<bool>))> = sets
        .iter()
        .filter(|(cell, _)| weak.get(*cell).is_some_and(|w| !w.is_empty()))
        .collect();
    let trained = exec.map(&cells, |(cell, (idx, ys))| {
        let x: Vec<_> = idx.iter().map(|&i| featurize(&corpus.phrases[i], &space)).collect();
        let cfg = TrainConfig {
            seed: config.seed ^ fxhash(&format!("{}/{}", cell.0, cell.1)),
            ..config.clone()
        };
        train_or_constant(&cell.0, &cell.1, &x, ys, space.hash(), &cfg).map(|m| ((*cell).clone(), m))
    });
    let models = trained.into_iter().collect::<Result<Models>>()?;
    Ok((space, models))
}

pub fn refine_cells(
    corpus: &Corpus,
    weak: &BTreeMap<Cell, Vec<usize>>,
    models: &Models,
    space: &FeatureSpace,
) -> Result<(BTreeMap<Cell, Vec<usize>>, RefineSummary)> {
    refine(weak, models, space.hash(), |i| featurize(&corpus.phrases[i], space))
}
