use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{StationId, StationRegistry};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_MINUTES: u32 = 30;

/// Calendar month, written `YYYY-MM`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) || !(1000..=9999).contains(&year) {
            return Err(Error::InvalidArgument(format!("invalid month {year}-{month}")));
        }
        Ok(Month { year, month })
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("month `{s}` is not YYYY-MM"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        Month::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One panelist-month of viewing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelRecord {
    pub panelist_id: String,
    pub month: Month,
    pub minutes: BTreeMap<StationId, u32>,
    pub total_news_minutes: u32,
    pub total_tv_minutes: u32,
    pub weight: f64,
}

impl PanelRecord {
    pub fn validate(&self, registry: &StationRegistry) -> std::result::Result<(), String> {
        if self.panelist_id.trim().is_empty() {
            return Err("empty panelist_id".into());
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(format!("weight {} must be positive", self.weight));
        }
        if let Some(s) = self.minutes.keys().find(|s| !registry.contains(s)) {
            return Err(format!("untracked station `{s}`"));
        }
        let tracked: u64 = self.minutes.values().map(|&m| u64::from(m)).sum();
        if tracked > u64::from(self.total_news_minutes) {
            return Err(format!(
                "station minutes {tracked} exceed total news minutes {}",
                self.total_news_minutes
            ));
        }
        if self.total_news_minutes > self.total_tv_minutes {
            return Err(format!(
                "news minutes {} exceed tv minutes {}",
                self.total_news_minutes, self.total_tv_minutes
            ));
        }
        Ok(())
    }

    pub fn minutes_in(&self, stations: &[StationId]) -> u64 {
        stations
            .iter()
            .map(|s| u64::from(self.minutes.get(s).copied().unwrap_or(0)))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PanelIssue {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PanelReport {
    pub accepted: usize,
    pub rejected: Vec<PanelIssue>,
}

/// Parses newline-delimited panel records; invalid lines and repeated
/// (panelist, month) pairs are reported and skipped.
pub fn parse_panel(data: &str, registry: &StationRegistry) -> (Vec<PanelRecord>, PanelReport) {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut report = PanelReport::default();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<PanelRecord>(line)
            .map_err(|e| format!("malformed record: {e}"))
            .and_then(|r| r.validate(registry).map(|_| r))
            .and_then(|r| {
                if seen.insert((r.panelist_id.clone(), r.month)) {
                    Ok(r)
                } else {
                    Err(format!("duplicate panelist-month {} {}", r.panelist_id, r.month))
                }
            });
        match parsed {
            Ok(r) => records.push(r),
            Err(reason) => report.rejected.push(PanelIssue { line: i + 1, reason }),
        }
    }
    report.accepted = records.len();
    (records, report)
}

pub fn load_panel(path: &Path, registry: &StationRegistry) -> Result<(Vec<PanelRecord>, PanelReport)> {
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_panel(&data, registry))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudienceShares {
    pub month: Month,
    pub stations: Vec<StationId>,
    pub threshold: Option<f64>,
    pub numerator: f64,
    pub denominator: f64,
    pub share: f64,
}

/// Records of one month sorted by panelist, so weighted sums do not
/// depend on input order.
fn month_records(panel: &[PanelRecord], month: Month) -> Result<Vec<&PanelRecord>> {
    let mut rows: Vec<&PanelRecord> = panel.iter().filter(|r| r.month == month).collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!("no panel records for {month}")));
    }
    rows.sort_by(|a, b| a.panelist_id.cmp(&b.panelist_id));
    Ok(rows)
}

fn shares(month: Month, stations: Vec<StationId>, threshold: Option<f64>, rows: &[&PanelRecord], keep: impl Fn(&PanelRecord) -> bool) -> AudienceShares {
    // fold from +0.0; an empty f64 sum is -0.0
    let denominator = rows.iter().map(|r| r.weight).fold(0.0, |a, w| a + w);
    let numerator = rows.iter().filter(|r| keep(r)).map(|r| r.weight).fold(0.0, |a, w| a + w);
    AudienceShares {
        month,
        stations,
        threshold,
        numerator,
        denominator,
        share: (numerator / denominator).min(1.0),
    }
}

/// Weighted share of the panel watching at least `min_minutes` of news.
pub fn active_consumers(panel: &[PanelRecord], month: Month, min_minutes: u32) -> Result<AudienceShares> {
    let rows = month_records(panel, month)?;
    Ok(shares(month, Vec::new(), None, &rows, |r| r.total_news_minutes >= min_minutes))
}

/// Weighted share of the panel that is active and spends at least
/// `threshold` of its news minutes on `stations` combined.
pub fn majority_share(
    panel: &[PanelRecord],
    month: Month,
    stations: &[StationId],
    threshold: f64,
    min_minutes: u32,
) -> Result<AudienceShares> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1]")));
    }
    if stations.is_empty() {
        return Err(Error::InvalidArgument("empty station set".into()));
    }
    let rows = month_records(panel, month)?;
    Ok(shares(month, stations.to_vec(), Some(threshold), &rows, |r| {
        r.total_news_minutes >= min_minutes
            && r.total_news_minutes > 0
            && r.minutes_in(stations) as f64 / r.total_news_minutes as f64 >= threshold
    }))
}
