//! Human annotation of layer-1 candidates: task sampling, record
//! validation, majority-vote aggregation and the task queue behind the
//! labeling API.

mod queue;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, StationId};
use crate::error::{Error, Result};
use crate::weaksup::{TopicRegistry, WeakLabel, NONE_LABEL};

pub use queue::{Progress, TaskQueue};

pub const SCHEMA_VERSION: u32 = 1;
pub const CANDIDATES_PER_TASK: usize = 3;
pub const DEFAULT_PER_CELL: usize = 50;
pub const DEFAULT_MIN_ANNOTATORS: usize = 4;
pub const DEFAULT_ANNOTATOR_CAP: usize = 7;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Choice {
    Topic(String),
    None,
}

impl From<String> for Choice {
    fn from(s: String) -> Self {
        if s == NONE_LABEL {
            Choice::None
        } else {
            Choice::Topic(s)
        }
    }
}

impl From<Choice> for String {
    fn from(c: Choice) -> Self {
        match c {
            Choice::Topic(t) => t,
            Choice::None => NONE_LABEL.to_string(),
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Topic(t) => f.write_str(t),
            Choice::None => f.write_str(NONE_LABEL),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationTask {
    pub schema_version: u32,
    pub task_id: String,
    pub segment_id: String,
    pub station: StationId,
    /// Topic of the (station, topic) cell the segment was sampled from.
    pub topic: String,
    pub text: String,
    /// Exactly three distinct topic ids; "none" is always allowed besides.
    pub candidates: Vec<String>,
}

impl AnnotationTask {
    pub fn allows(&self, choice: &Choice) -> bool {
        match choice {
            Choice::None => true,
            Choice::Topic(t) => self.candidates.iter().any(|c| c == t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub schema_version: u32,
    pub task_id: String,
    pub annotator_id: String,
    pub choice: Choice,
    pub timestamp: DateTime<Utc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    Resolved,
    NeedsMore,
    /// Still tied after the annotator cap; excluded from ground truth.
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub task_id: String,
    pub segment_id: String,
    pub label: Option<Choice>,
    pub status: LabelStatus,
    pub n_records: usize,
}

/// Top three topics by layer-1 score, ties broken by topic id; padded
/// with the lexicographically first remaining topics.
pub fn candidate_topics(label: &WeakLabel, registry: &TopicRegistry) -> Vec<String> {
    let mut ranked: Vec<(&str, f64)> = registry.ids().map(|t| (t, label.score(t))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(CANDIDATES_PER_TASK)
        .map(|(t, _)| t.to_string())
        .collect()
}

/// Samples up to `n_per_cell` segments per (topic, station) cell of the
/// weak sets, without replacement. `labels` is aligned with the corpus.
pub fn sample_tasks(
    corpus: &Corpus,
    labels: &[WeakLabel],
    registry: &TopicRegistry,
    n_per_cell: usize,
    seed: u64,
) -> Result<Vec<AnnotationTask>> {
    if registry.len() < CANDIDATES_PER_TASK {
        return Err(Error::Config(format!(
            "annotation needs at least {CANDIDATES_PER_TASK} topics, registry has {}",
            registry.len()
        )));
    }
    if labels.len() != corpus.len() {
        return Err(Error::InvalidArgument("weak labels are not aligned with the corpus".into()));
    }
    let stations: BTreeSet<&StationId> = corpus.segments.iter().map(|s| &s.station).collect();
    let mut tasks = Vec::new();
    for (z, topic) in registry.ids().enumerate() {
        for (s, station) in stations.iter().enumerate() {
            let cell: Vec<usize> = (0..corpus.len())
                .filter(|&i| &&corpus.segments[i].station == station && labels[i].has(topic))
                .collect();
            if cell.is_empty() {
                warn!("cell ({station}, {topic}) is empty; no tasks sampled");
                continue;
            }
            let cell_seed = seed ^ ((z as u64) << 32 | s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
            let mut picked: Vec<usize> = sample(&mut rng, cell.len(), n_per_cell.min(cell.len()))
                .into_iter()
                .map(|j| cell[j])
                .collect();
            picked.sort_unstable();
            for i in picked {
                let seg = &corpus.segments[i];
                let segment_id = seg.id();
                tasks.push(AnnotationTask {
                    schema_version: SCHEMA_VERSION,
                    task_id: format!("{topic}/{station}/{segment_id}"),
                    segment_id,
                    station: (*station).clone(),
                    topic: topic.to_string(),
                    text: seg.text.clone(),
                    candidates: candidate_topics(&labels[i], registry),
                });
            }
        }
    }
    Ok(tasks)
}

/// Majority vote over one task's records.
pub fn resolve(choices: &[&Choice], min_annotators: usize, cap: usize) -> (Option<Choice>, LabelStatus) {
    let n = choices.len();
    let mut counts: BTreeMap<&Choice, usize> = BTreeMap::new();
    for c in choices {
        *counts.entry(c).or_default() += 1;
    }
    if n >= min_annotators {
        if let Some((c, _)) = counts.iter().find(|(_, &k)| 2 * k > n) {
            return (Some((*c).clone()), LabelStatus::Resolved);
        }
    }
    if n >= cap {
        (None, LabelStatus::Dropped)
    } else {
        (None, LabelStatus::NeedsMore)
    }
}

/// Ground truth per task, in task order. Every record must reference a
/// known task and choose one of its candidates or "none".
pub fn aggregate(
    tasks: &[AnnotationTask],
    records: &[AnnotationRecord],
    min_annotators: usize,
    cap: usize,
) -> Result<Vec<GroundTruthLabel>> {
    let index: HashMap<&str, usize> = tasks.iter().enumerate().map(|(i, t)| (t.task_id.as_str(), i)).collect();
    let mut per_task: Vec<Vec<&Choice>> = vec![Vec::new(); tasks.len()];
    for r in records {
        let &i = index
            .get(r.task_id.as_str())
            .ok_or_else(|| Error::UnknownTask(r.task_id.clone()))?;
        if !tasks[i].allows(&r.choice) {
            return Err(Error::Validation(format!(
                "choice `{}` is not a candidate of task `{}`",
                r.choice, r.task_id
            )));
        }
        per_task[i].push(&r.choice);
    }
    Ok(tasks
        .iter()
        .zip(per_task)
        .map(|(t, choices)| {
            let (label, status) = resolve(&choices, min_annotators, cap);
            GroundTruthLabel {
                task_id: t.task_id.clone(),
                segment_id: t.segment_id.clone(),
                label,
                status,
                n_records: choices.len(),
            }
        })
        .collect())
}

pub fn export_tasks(tasks: &[AnnotationTask], path: &Path) -> Result<()> {
    write_jsonl(path, tasks)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn load_tasks(path: &Path) -> Result<Vec<AnnotationTask>> {
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tasks = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let task: AnnotationTask = serde_json::from_str(line).map_err(|e| Error::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if task.schema_version != SCHEMA_VERSION {
            return Err(Error::Record {
                line: i + 1,
                reason: format!("schema version {} unsupported", task.schema_version),
            });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RejectedRecord {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub records: Vec<AnnotationRecord>,
    pub rejected: Vec<RejectedRecord>,
}

/// Checks one record against the task set; `seen` tracks
/// (task, annotator) pairs already accepted.
pub fn validate_record(
    record: &AnnotationRecord,
    tasks: &HashMap<&str, &AnnotationTask>,
    seen: &HashSet<(String, String)>,
) -> std::result::Result<(), String> {
    if record.schema_version != SCHEMA_VERSION {
        return Err(format!("schema version {} unsupported", record.schema_version));
    }
    if record.annotator_id.trim().is_empty() {
        return Err("empty annotator_id".into());
    }
    let task = tasks
        .get(record.task_id.as_str())
        .ok_or_else(|| format!("unknown task `{}`", record.task_id))?;
    if !task.allows(&record.choice) {
        return Err(format!(
            "choice `{}` is not among the candidates of task `{}`",
            record.choice, record.task_id
        ));
    }
    if seen.contains(&(record.task_id.clone(), record.annotator_id.clone())) {
        return Err(format!(
            "annotator `{}` already labeled task `{}`",
            record.annotator_id, record.task_id
        ));
    }
    Ok(())
}

pub fn parse_records(data: &str, tasks: &[AnnotationTask]) -> ImportReport {
    let index: HashMap<&str, &AnnotationTask> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let mut seen = HashSet::new();
    let mut report = ImportReport::default();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<AnnotationRecord>(line)
            .map_err(|e| format!("malformed record: {e}"))
            .and_then(|r| validate_record(&r, &index, &seen).map(|_| r));
        match outcome {
            Ok(r) => {
                seen.insert((r.task_id.clone(), r.annotator_id.clone()));
                report.records.push(r);
            }
            Err(reason) => report.rejected.push(RejectedRecord { line: i + 1, reason }),
        }
    }
    report
}

pub fn import_records(path: &Path, tasks: &[AnnotationTask]) -> Result<ImportReport> {
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_records(&data, tasks))
}
