use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    parse_records, resolve, validate_record, AnnotationRecord, AnnotationTask, GroundTruthLabel,
    LabelStatus, SCHEMA_VERSION,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub schema_version: u32,
    pub tasks: usize,
    pub records: usize,
    pub resolved: usize,
    pub needs_more: usize,
    pub dropped: usize,
    pub annotators: usize,
}

struct State {
    tasks: Vec<AnnotationTask>,
    index: HashMap<String, usize>,
    records: Vec<Vec<AnnotationRecord>>,
    seen: HashSet<(String, String)>,
    order: Vec<(usize, usize)>,
    log: Option<(PathBuf, File)>,
}

impl State {
    fn status(&self, i: usize, min: usize, cap: usize) -> LabelStatus {
        let choices: Vec<_> = self.records[i].iter().map(|r| &r.choice).collect();
        resolve(&choices, min, cap).1
    }
}

/// Serves tasks to annotators and collects their records. Every accepted
/// record is appended to the log file before the call returns, so a
/// restarted queue picks up exactly where the last one stopped.
pub struct TaskQueue {
    state: Mutex<State>,
    min_annotators: usize,
    cap: usize,
}

impl TaskQueue {
    pub fn new(tasks: Vec<AnnotationTask>, min_annotators: usize, cap: usize) -> Result<Self> {
        if min_annotators == 0 || cap < min_annotators {
            return Err(Error::InvalidArgument(format!(
                "annotator cap {cap} must be at least min_annotators {min_annotators} > 0"
            )));
        }
        let mut index = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if index.insert(t.task_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate task id `{}`", t.task_id)));
            }
        }
        let n = tasks.len();
        Ok(TaskQueue {
            state: Mutex::new(State {
                tasks,
                index,
                records: vec![Vec::new(); n],
                seen: HashSet::new(),
                order: Vec::new(),
                log: None,
            }),
            min_annotators,
            cap,
        })
    }

    /// Replays records already in `path`, then appends new ones to it.
    pub fn with_log(self, path: &Path) -> Result<Self> {
        {
            let mut st = self.state.lock().expect("queue lock poisoned");
            if path.exists() {
                let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let report = parse_records(&data, &st.tasks);
                if let Some(bad) = report.rejected.first() {
                    return Err(Error::Record {
                        line: bad.line,
                        reason: format!("{}: {}", path.display(), bad.reason),
                    });
                }
                for r in report.records {
                    insert(&mut st, r);
                }
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            st.log = Some((path.to_path_buf(), file));
        }
        Ok(self)
    }

    /// The first open task in task order that `annotator` has not labeled.
    /// A task is open until it resolves or reaches the annotator cap.
    pub fn next_task(&self, annotator: &str) -> Option<AnnotationTask> {
        let st = self.state.lock().expect("queue lock poisoned");
        (0..st.tasks.len())
            .find(|&i| {
                st.records[i].len() < self.cap
                    && st.status(i, self.min_annotators, self.cap) == LabelStatus::NeedsMore
                    && !st.seen.contains(&(st.tasks[i].task_id.clone(), annotator.to_string()))
            })
            .map(|i| st.tasks[i].clone())
    }

    pub fn submit(&self, record: AnnotationRecord) -> Result<LabelStatus> {
        let mut st = self.state.lock().expect("queue lock poisoned");
        let &i = st
            .index
            .get(&record.task_id)
            .ok_or_else(|| Error::UnknownTask(record.task_id.clone()))?;
        if st.seen.contains(&(record.task_id.clone(), record.annotator_id.clone())) {
            return Err(Error::Conflict(format!(
                "annotator `{}` already labeled task `{}`",
                record.annotator_id, record.task_id
            )));
        }
        if st.status(i, self.min_annotators, self.cap) != LabelStatus::NeedsMore {
            return Err(Error::Conflict(format!("task `{}` is closed", record.task_id)));
        }
        let tasks: HashMap<&str, &AnnotationTask> = std::iter::once((st.tasks[i].task_id.as_str(), &st.tasks[i])).collect();
        validate_record(&record, &tasks, &HashSet::new()).map_err(Error::Validation)?;
        if let Some((path, file)) = st.log.as_mut() {
            let mut line = serde_json::to_vec(&record)?;
            line.push(b'\n');
            file.write_all(&line).map_err(|e| Error::io(&*path, e))?;
            file.flush().map_err(|e| Error::io(&*path, e))?;
        }
        insert(&mut st, record);
        Ok(st.status(i, self.min_annotators, self.cap))
    }

    pub fn progress(&self) -> Progress {
        let st = self.state.lock().expect("queue lock poisoned");
        let mut p = Progress {
            schema_version: SCHEMA_VERSION,
            tasks: st.tasks.len(),
            records: st.order.len(),
            annotators: st.seen.iter().map(|(_, a)| a).collect::<HashSet<_>>().len(),
            ..Progress::default()
        };
        for i in 0..st.tasks.len() {
            match st.status(i, self.min_annotators, self.cap) {
                LabelStatus::Resolved => p.resolved += 1,
                LabelStatus::NeedsMore => p.needs_more += 1,
                LabelStatus::Dropped => p.dropped += 1,
            }
        }
        p
    }

    /// Accepted records in submission order.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        let st = self.state.lock().expect("queue lock poisoned");
        st.order.iter().map(|&(i, j)| st.records[i][j].clone()).collect()
    }

    pub fn tasks(&self) -> Vec<AnnotationTask> {
        self.state.lock().expect("queue lock poisoned").tasks.clone()
    }

    pub fn ground_truth(&self) -> Result<Vec<GroundTruthLabel>> {
        let tasks = self.tasks();
        super::aggregate(&tasks, &self.records(), self.min_annotators, self.cap)
    }
}

fn insert(st: &mut State, r: AnnotationRecord) {
    let i = st.index[&r.task_id];
    st.seen.insert((r.task_id.clone(), r.annotator_id.clone()));
    st.order.push((i, st.records[i].len()));
    st.records[i].push(r);
}
