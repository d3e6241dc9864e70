//! Payloads of the analysis stages, computed from the refined topic sets
//! and the panel.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::layers::topic_sets;
use crate::classify::Cell;
use crate::corpus::{Corpus, ProgramCategory, StationId, StationRegistry, CABLE};
use crate::error::Result;
use crate::metrics::{
    active_consumers, divergence_series, majority_share, AudienceShares, DivergenceSeries, Month, PanelRecord,
    PanelReport, ShareTable, TopicShareSeries,
};
use crate::polarize::{
    partisan_scores, polarization_series, EstimatorOptions, GroupCorpus, SegmentFilter, SeriesPoint, SeriesSpec, Side,
};
use crate::Exec;

pub const BROADCAST_POOL: &str = "broadcast";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub segment_id: String,
    pub station: StationId,
    pub program: String,
    pub topic: String,
    /// The cable station the comparison was run for.
    pub source: String,
    pub side: Side,
    pub score: Option<f64>,
    pub own_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramScores {
    pub station: StationId,
    pub program: String,
    pub topic: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// 10th through 90th percentiles in steps of ten.
    pub deciles: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationOutput {
    pub over_time: Vec<SeriesPoint>,
    pub by_era: Vec<SeriesPoint>,
    pub programs: Vec<ProgramScores>,
    pub scores: Vec<ScoreRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceOutput {
    pub shares: Vec<TopicShareSeries>,
    pub series: Vec<DivergenceSeries>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionRow {
    /// active, station, broadcast_pool, cable_pool or big_six.
    pub panel: String,
    pub label: String,
    pub shares: AudienceShares,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionOutput {
    pub min_minutes: u32,
    pub rejected_records: usize,
    pub rows: Vec<ConsumptionRow>,
}

fn category_filters() -> Vec<Option<BTreeSet<ProgramCategory>>> {
    vec![
        None,
        Some([ProgramCategory::HardNews].into()),
        Some([ProgramCategory::TalkShows, ProgramCategory::PartisanOpinion].into()),
    ]
}

/// Cable stations that actually air in the corpus.
fn cable_sources(corpus: &Corpus) -> Vec<StationId> {
    let present: BTreeSet<&StationId> = corpus.segments.iter().map(|s| &s.station).collect();
    StationRegistry::cable_pool()
        .into_iter()
        .filter(|s| present.contains(s))
        .collect()
}

fn estimator(cfg: &PipelineConfig, exec: Exec) -> EstimatorOptions {
    EstimatorOptions {
        normalization: cfg.polarization.normalization,
        zero_policy: cfg.polarization.zero_denominator,
        exec,
    }
}

/// Every comparison puts one cable station against the pooled broadcast
/// networks, restricted to segments in some refined topic set.
pub fn polarization_outputs(
    corpus: &Corpus,
    refined: &BTreeMap<Cell, Vec<usize>>,
    cfg: &PipelineConfig,
    exec: Exec,
) -> Result<PolarizationOutput> {
    let opts = estimator(cfg, exec);
    let topics = topic_sets(refined);
    let labeled: HashSet<usize> = topics.values().flatten().copied().collect();
    let broadcast = StationRegistry::broadcast_pool();
    let sources = cable_sources(corpus);

    let spec = |src: &StationId, window, filter| SeriesSpec {
        source_label: src.to_string(),
        source: vec![src.clone()],
        target_label: BROADCAST_POOL.into(),
        target: broadcast.clone(),
        window,
        filter,
    };

    let mut over_time = Vec::new();
    for src in &sources {
        for categories in category_filters() {
            let filter = SegmentFilter {
                categories,
                topic: Some(("any".into(), labeled.clone())),
            };
            over_time.extend(polarization_series(corpus, &spec(src, cfg.polarization.window.clone(), filter), &opts));
        }
    }

    let mut by_era = Vec::new();
    let mut scores = Vec::new();
    for (topic, members) in &topics {
        let set: HashSet<usize> = members.iter().copied().collect();
        for src in &sources {
            let filter = SegmentFilter {
                categories: None,
                topic: Some((topic.clone(), set.clone())),
            };
            by_era.extend(polarization_series(corpus, &spec(src, cfg.polarization.eras.clone(), filter), &opts));
            scores.extend(topic_scores(corpus, members, topic, src, &broadcast, &opts)?);
        }
    }

    Ok(PolarizationOutput {
        over_time,
        by_era,
        programs: program_summaries(&scores),
        scores,
    })
}

/// Leave-out scores over all dates for one topic and cable station.
/// Topics too thin to estimate contribute no rows.
fn topic_scores(
    corpus: &Corpus,
    members: &[usize],
    topic: &str,
    src: &StationId,
    broadcast: &[StationId],
    opts: &EstimatorOptions,
) -> Result<Vec<ScoreRow>> {
    let pick = |keep: &dyn Fn(&StationId) -> bool| -> Vec<usize> {
        let mut v: Vec<usize> = members.iter().copied().filter(|&i| keep(&corpus.segments[i].station)).collect();
        v.sort_unstable();
        v
    };
    let s_idx = pick(&|s| s == src);
    let t_idx = pick(&|s| broadcast.contains(s));
    let group = |label: &str, idx: &[usize]| {
        GroupCorpus::new(label, idx.iter().map(|&i| (corpus.segments[i].id(), corpus.phrases[i].clone())).collect())
    };
    let (Ok(s), Ok(t)) = (group(src.as_str(), &s_idx), group(BROADCAST_POOL, &t_idx)) else {
        return Ok(Vec::new());
    };
    let Ok(found) = partisan_scores(&s, &t, opts) else {
        return Ok(Vec::new());
    };
    let by_id: BTreeMap<String, usize> = s_idx.iter().chain(&t_idx).map(|&i| (corpus.segments[i].id(), i)).collect();
    Ok(found
        .into_iter()
        .map(|p| {
            let seg = &corpus.segments[by_id[&p.segment_id]];
            ScoreRow {
                segment_id: p.segment_id,
                station: seg.station.clone(),
                program: seg.program.clone(),
                topic: topic.to_string(),
                source: src.to_string(),
                side: p.side,
                score: p.score,
                own_score: p.own_score,
            }
        })
        .collect())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // linear interpolation between closest ranks
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Score distributions of cable programs, per topic and over all topics.
pub fn program_summaries(scores: &[ScoreRow]) -> Vec<ProgramScores> {
    let mut groups: BTreeMap<(StationId, String, String), Vec<f64>> = BTreeMap::new();
    for r in scores.iter().filter(|r| r.side == Side::Source) {
        let Some(v) = r.score else { continue };
        for topic in [r.topic.as_str(), "all"] {
            groups
                .entry((r.station.clone(), r.program.clone(), topic.to_string()))
                .or_default()
                .push(v);
        }
    }
    groups
        .into_iter()
        .map(|((station, program, topic), mut v)| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            ProgramScores {
                station,
                program,
                topic,
                n,
                mean,
                sd: var.sqrt(),
                deciles: (1..=9).map(|d| percentile(&v, d as f64 / 10.0)).collect(),
            }
        })
        .collect()
}

/// Daily topic shares per station and the divergence of every station pair.
pub fn divergence_outputs(
    corpus: &Corpus,
    refined: &BTreeMap<Cell, Vec<usize>>,
    cfg: &PipelineConfig,
) -> Result<DivergenceOutput> {
    let mut topics = topic_sets(refined);
    // topics whose sets came out empty still count toward K
    for t in &cfg.topics {
        topics.entry(t.id.clone()).or_default();
    }
    let table = ShareTable::build(corpus, &topics);
    let stations: Vec<StationId> = table.stations().into_iter().cloned().collect();
    let shares = stations
        .iter()
        .flat_map(|s| topics.keys().filter_map(|t| table.series(s, t)))
        .collect();
    let mut series = Vec::new();
    for (a, i) in stations.iter().enumerate() {
        for j in &stations[a + 1..] {
            series.push(divergence_series(&table, i, j, &cfg.divergence.window, cfg.divergence.aggregation)?);
        }
    }
    Ok(DivergenceOutput { shares, series })
}

pub fn consumption_outputs(panel: &[PanelRecord], report: PanelReport, cfg: &PipelineConfig) -> Result<ConsumptionOutput> {
    let min = cfg.consumption.min_minutes;
    let months: BTreeSet<Month> = panel.iter().map(|r| r.month).collect();
    let mut pools: Vec<(&str, String, Vec<StationId>)> = CABLE
        .iter()
        .chain(crate::corpus::BROADCAST.iter())
        .map(|s| ("station", s.to_string(), vec![StationId::new_unchecked(*s)]))
        .collect();
    pools.push(("broadcast_pool", BROADCAST_POOL.into(), StationRegistry::broadcast_pool()));
    pools.push(("cable_pool", "cable".into(), StationRegistry::cable_pool()));
    pools.push(("big_six", "big_six".into(), StationRegistry::big_six_pool()));

    let mut rows = Vec::new();
    for &month in &months {
        rows.push(ConsumptionRow {
            panel: "active".into(),
            label: "active".into(),
            shares: active_consumers(panel, month, min)?,
        });
        for (kind, label, stations) in &pools {
            for &t in &cfg.consumption.thresholds {
                rows.push(ConsumptionRow {
                    panel: kind.to_string(),
                    label: label.clone(),
                    shares: majority_share(panel, month, stations, t, min)?,
                });
            }
        }
    }
    Ok(ConsumptionOutput {
        min_minutes: min,
        rejected_records: report.rejected.len(),
        rows,
    })
}
