//! Production-side topic shares and divergence, plus panel-side
//! consumption shares.

mod panel;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, StationId};
use crate::error::{Error, Result};
use crate::window::Window;

pub use panel::{
    active_consumers, load_panel, majority_share, parse_panel, AudienceShares, Month, PanelIssue,
    PanelRecord, PanelReport, DEFAULT_MIN_MINUTES,
};

/// Words aired per (station, day): the total and the part falling in each
/// topic's segments. Topics follow the order given at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareTable {
    pub topics: Vec<String>,
    pub days: BTreeMap<(StationId, NaiveDate), DayWords>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayWords {
    pub total: u64,
    pub topic: Vec<u64>,
}

impl DayWords {
    fn share(&self, k: usize) -> Option<f64> {
        (self.total > 0).then(|| self.topic[k] as f64 / self.total as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharePoint {
    pub date: NaiveDate,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicShareSeries {
    pub station: StationId,
    pub topic: String,
    /// Days without coverage for the station are absent.
    pub points: Vec<SharePoint>,
}

impl ShareTable {
    /// `topic_sets` maps each topic to the corpus indices labeled with it.
    /// A segment may sit in several sets.
    pub fn build(corpus: &Corpus, topic_sets: &BTreeMap<String, Vec<usize>>) -> Self {
        let topics: Vec<String> = topic_sets.keys().cloned().collect();
        let mut days: BTreeMap<(StationId, NaiveDate), DayWords> = BTreeMap::new();
        let k = topics.len();
        for seg in &corpus.segments {
            days.entry((seg.station.clone(), seg.air_date))
                .or_insert_with(|| DayWords { total: 0, topic: vec![0; k] })
                .total += u64::from(seg.word_count);
        }
        for (z, members) in topic_sets.values().enumerate() {
            for &i in members.iter().collect::<BTreeSet<_>>() {
                let seg = &corpus.segments[i];
                if let Some(d) = days.get_mut(&(seg.station.clone(), seg.air_date)) {
                    d.topic[z] += u64::from(seg.word_count);
                }
            }
        }
        ShareTable { topics, days }
    }

    pub fn stations(&self) -> BTreeSet<&StationId> {
        self.days.keys().map(|(s, _)| s).collect()
    }

    pub fn topic_index(&self, topic: &str) -> Option<usize> {
        self.topics.iter().position(|t| t == topic)
    }

    /// Share of the station's words that day spent on `topic`; `None`
    /// when the station aired nothing that day.
    pub fn share(&self, station: &StationId, topic: &str, day: NaiveDate) -> Option<f64> {
        let k = self.topic_index(topic)?;
        self.days.get(&(station.clone(), day))?.share(k)
    }

    pub fn series(&self, station: &StationId, topic: &str) -> Option<TopicShareSeries> {
        let k = self.topic_index(topic)?;
        let points = self
            .days
            .range((station.clone(), NaiveDate::MIN)..=(station.clone(), NaiveDate::MAX))
            .filter_map(|((_, date), d)| d.share(k).map(|y| SharePoint { date: *date, y }))
            .collect();
        Some(TopicShareSeries {
            station: station.clone(),
            topic: topic.to_string(),
            points,
        })
    }

    /// Per-topic shares of one station over a window, or `None` when the
    /// station has no coverage in it.
    pub fn window_shares(
        &self,
        station: &StationId,
        start: NaiveDate,
        end: NaiveDate,
        aggregation: ShareAggregation,
    ) -> Option<Vec<f64>> {
        let days: Vec<&DayWords> = self
            .days
            .range((station.clone(), start)..(station.clone(), end))
            .map(|(_, d)| d)
            .filter(|d| d.total > 0)
            .collect();
        if days.is_empty() {
            return None;
        }
        let k = self.topics.len();
        Some(match aggregation {
            ShareAggregation::DailyMean => (0..k)
                .map(|z| days.iter().map(|d| d.topic[z] as f64 / d.total as f64).sum::<f64>() / days.len() as f64)
                .collect(),
            ShareAggregation::WordWeighted => {
                let total: u64 = days.iter().map(|d| d.total).sum();
                (0..k)
                    .map(|z| days.iter().map(|d| d.topic[z]).sum::<u64>() as f64 / total as f64)
                    .collect()
            }
        })
    }
}

/// How daily shares are pooled within a divergence window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareAggregation {
    #[default]
    DailyMean,
    WordWeighted,
}

/// Mean absolute difference of two share vectors over their K topics.
pub fn divergence(y_i: &[f64], y_j: &[f64]) -> Result<f64> {
    if y_i.len() != y_j.len() {
        return Err(Error::InvalidArgument(format!(
            "share vectors differ in length ({} vs {})",
            y_i.len(),
            y_j.len()
        )));
    }
    if y_i.is_empty() {
        return Err(Error::InvalidArgument("no topics".into()));
    }
    if let Some(y) = y_i.iter().chain(y_j).find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::InvalidArgument(format!("share {y} outside [0, 1]")));
    }
    let sum: f64 = y_i.iter().zip(y_j).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / y_i.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergencePoint {
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSeries {
    pub station_i: StationId,
    pub station_j: StationId,
    pub k: usize,
    pub aggregation: ShareAggregation,
    pub points: Vec<DivergencePoint>,
}

/// δ per window for one station pair. Windows where only one of the two
/// stations aired carry no value.
pub fn divergence_series(
    table: &ShareTable,
    i: &StationId,
    j: &StationId,
    window: &Window,
    aggregation: ShareAggregation,
) -> Result<DivergenceSeries> {
    let mut windows = BTreeSet::new();
    for (s, date) in table.days.keys() {
        if s == i || s == j {
            if let Some(b) = window.bounds(*date) {
                windows.insert(b);
            }
        }
    }
    let mut points = Vec::with_capacity(windows.len());
    for (start, end) in windows {
        let a = table.window_shares(i, start, end, aggregation);
        let b = table.window_shares(j, start, end, aggregation);
        let delta = match (a, b) {
            (Some(a), Some(b)) => Some(divergence(&a, &b)?),
            _ => None,
        };
        points.push(DivergencePoint {
            window_start: start,
            window_end: end,
            delta,
        });
    }
    Ok(DivergenceSeries {
        station_i: i.clone(),
        station_j: j.clone(),
        k: table.topics.len(),
        aggregation,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub method: String,
    pub window_days: u32,
}

/// Centered rolling mean over the values present within the window
/// around each date. Even windows lean one day forward. Input must be
/// sorted by date.
pub fn smooth(series: &[(NaiveDate, f64)], window_days: u32) -> Result<(Vec<(NaiveDate, f64)>, Smoothing)> {
    if window_days == 0 {
        return Err(Error::InvalidArgument("smoothing window must be at least 1 day".into()));
    }
    if series.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidArgument("series must be strictly increasing in date".into()));
    }
    let back = i64::from((window_days - 1) / 2);
    let fwd = i64::from(window_days / 2);
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(series.len());
    for &(d, _) in series {
        while (d - series[lo].0).num_days() > back {
            lo += 1;
        }
        while hi < series.len() && (series[hi].0 - d).num_days() <= fwd {
            hi += 1;
        }
        let vals = &series[lo..hi];
        out.push((d, vals.iter().map(|v| v.1).sum::<f64>() / vals.len() as f64));
    }
    Ok((
        out,
        Smoothing {
            method: "centered_rolling_mean".into(),
            window_days,
        },
    ))
}

#[cfg(test)]
mod tests;
