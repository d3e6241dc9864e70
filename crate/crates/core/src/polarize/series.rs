use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{leave_out_estimate, EstimatorOptions, GroupCorpus};
use crate::corpus::{Corpus, ProgramCategory, StationId};
use crate::window::Window;

#[derive(Clone, Debug, Default)]
pub struct SegmentFilter {
    pub categories: Option<BTreeSet<ProgramCategory>>,
    /// Topic id and the corpus indices of its refined segment set.
    pub topic: Option<(String, HashSet<usize>)>,
}

impl SegmentFilter {
    pub fn accepts(&self, corpus: &Corpus, idx: usize) -> bool {
        let seg = &corpus.segments[idx];
        self.categories
            .as_ref()
            .is_none_or(|c| c.contains(&seg.category))
            && self.topic.as_ref().is_none_or(|(_, set)| set.contains(&idx))
    }

    pub fn category_label(&self) -> String {
        match &self.categories {
            None => "all".into(),
            Some(c) => c.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("+"),
        }
    }

    pub fn topic_label(&self) -> String {
        self.topic.as_ref().map_or_else(|| "all".into(), |(t, _)| t.clone())
    }
}

#[derive(Clone, Debug)]
pub struct SeriesSpec {
    pub source_label: String,
    pub source: Vec<StationId>,
    pub target_label: String,
    pub target: Vec<StationId>,
    pub window: Window,
    pub filter: SegmentFilter,
}

/// One row of the estimate export. Windows where either side has fewer
/// than two usable segments carry a flag and no value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub source: String,
    pub target: String,
    pub category_filter: String,
    pub topic_filter: String,
    pub pi_lo: Option<f64>,
    pub n_source: usize,
    pub n_target: usize,
    pub flag: Option<String>,
}

pub fn polarization_series(
    corpus: &Corpus,
    spec: &SeriesSpec,
    opts: &EstimatorOptions,
) -> Vec<SeriesPoint> {
    type Bucket = (Vec<usize>, Vec<usize>);
    let mut windows: BTreeMap<(NaiveDate, NaiveDate), Bucket> = BTreeMap::new();
    for (idx, seg) in corpus.segments.iter().enumerate() {
        let in_source = spec.source.contains(&seg.station);
        let in_target = spec.target.contains(&seg.station);
        if !(in_source || in_target) || !spec.filter.accepts(corpus, idx) {
            continue;
        }
        let Some(bounds) = spec.window.bounds(seg.air_date) else {
            continue;
        };
        let bucket = windows.entry(bounds).or_default();
        if in_source {
            bucket.0.push(idx);
        }
        if in_target {
            bucket.1.push(idx);
        }
    }

    let members = |idxs: &[usize]| -> Vec<(String, crate::corpus::PhraseVector)> {
        idxs.iter()
            .map(|&i| (corpus.segments[i].id(), corpus.phrases[i].clone()))
            .collect()
    };

    windows
        .into_iter()
        .map(|((start, end), (src, tgt))| {
            let mut point = SeriesPoint {
                window_start: start,
                window_end: end,
                source: spec.source_label.clone(),
                target: spec.target_label.clone(),
                category_filter: spec.filter.category_label(),
                topic_filter: spec.filter.topic_label(),
                pi_lo: None,
                n_source: 0,
                n_target: 0,
                flag: None,
            };
            let groups = GroupCorpus::new(&spec.source_label, members(&src)).and_then(|s| {
                GroupCorpus::new(&spec.target_label, members(&tgt)).map(|t| (s, t))
            });
            match groups.and_then(|(s, t)| leave_out_estimate(&s, &t, opts)) {
                Ok(est) => {
                    point.pi_lo = Some(est.value);
                    point.n_source = est.n_source;
                    point.n_target = est.n_target;
                }
                Err(e) => {
                    point.n_source = src.len();
                    point.n_target = tgt.len();
                    point.flag = Some(e.to_string());
                }
            }
            point
        })
        .collect()
}
