use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Station code, validated against a [`StationRegistry`] at ingestion.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(String);

impl StationId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Builds an id without registry validation. Used for fixtures and tests.
    pub fn new_unchecked(code: impl Into<String>) -> Self {
        StationId(code.into())
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const BROADCAST: [&str; 3] = ["ABC", "CBS", "NBC"];
pub const CABLE: [&str; 3] = ["CNN", "FNC", "MSNBC"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StationRegistry {
    codes: BTreeSet<String>,
}

impl Default for StationRegistry {
    fn default() -> Self {
        StationRegistry {
            codes: BROADCAST.iter().chain(CABLE.iter()).map(|s| s.to_string()).collect(),
        }
    }
}

impl StationRegistry {
    pub fn with_extra<I, S>(extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut reg = Self::default();
        reg.codes.extend(extra.into_iter().map(Into::into));
        reg
    }

    pub fn parse(&self, code: &str) -> Option<StationId> {
        self.codes.contains(code).then(|| StationId(code.to_string()))
    }

    pub fn contains(&self, station: &StationId) -> bool {
        self.codes.contains(station.as_str())
    }

    pub fn stations(&self) -> impl Iterator<Item = StationId> + '_ {
        self.codes.iter().map(|c| StationId(c.clone()))
    }

    pub fn broadcast_pool() -> Vec<StationId> {
        BROADCAST.iter().map(|s| StationId(s.to_string())).collect()
    }

    pub fn cable_pool() -> Vec<StationId> {
        CABLE.iter().map(|s| StationId(s.to_string())).collect()
    }

    pub fn big_six_pool() -> Vec<StationId> {
        BROADCAST.iter().chain(CABLE.iter()).map(|s| StationId(s.to_string())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramCategory {
    HardNews,
    TalkShows,
    PartisanOpinion,
    SoftNews,
    LocalNews,
    Other,
}

impl ProgramCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ProgramCategory::HardNews => "hard_news",
            ProgramCategory::TalkShows => "talk_shows",
            ProgramCategory::PartisanOpinion => "partisan_opinion",
            ProgramCategory::SoftNews => "soft_news",
            ProgramCategory::LocalNews => "local_news",
            ProgramCategory::Other => "other",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub station: StationId,
    pub program_title: String,
    pub category: ProgramCategory,
    pub air_date: NaiveDate,
    #[serde(with = "hh_mm")]
    pub air_time: NaiveTime,
    pub duration_min: u32,
    pub text: String,
    /// Half-open `[start, end)` ranges in character offsets.
    pub ad_spans: Vec<[usize; 2]>,
}

mod hh_mm {
    use chrono::NaiveTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&t.format("%H:%M"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveTime, D::Error> {
        let raw = String::deserialize(d)?;
        NaiveTime::parse_from_str(&raw, "%H:%M").map_err(serde::de::Error::custom)
    }
}

/// Wire form of an episode record; field set is exact.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEpisode {
    id: String,
    station: String,
    program_title: String,
    category: ProgramCategory,
    air_date: NaiveDate,
    air_time: String,
    duration_min: i64,
    text: String,
    ad_spans: Vec<[i64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordIssue {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<RecordIssue>,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty()
    }
}

pub fn ingest_episodes(
    path: impl AsRef<Path>,
    registry: &StationRegistry,
) -> Result<(Vec<Episode>, IngestReport)> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_episodes(&data, registry))
}

/// Parses newline-delimited episode records. Invalid records are reported
/// with their 1-based line number and skipped; blank lines are ignored.
pub fn parse_episodes(data: &str, registry: &StationRegistry) -> (Vec<Episode>, IngestReport) {
    let mut episodes = Vec::new();
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();

    for (idx, line) in data.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEpisode = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(RecordIssue {
                    line: line_no,
                    id: None,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        let id = raw.id.clone();
        match validate(raw, registry) {
            Ok(ep) if !seen.insert(ep.id.clone()) => report.rejected.push(RecordIssue {
                line: line_no,
                id: Some(id),
                reason: "duplicate episode id".into(),
            }),
            Ok(ep) => episodes.push(ep),
            Err(reason) => report.rejected.push(RecordIssue {
                line: line_no,
                id: Some(id),
                reason,
            }),
        }
    }
    report.accepted = episodes.len();
    (episodes, report)
}

fn validate(raw: RawEpisode, registry: &StationRegistry) -> std::result::Result<Episode, String> {
    if raw.id.trim().is_empty() {
        return Err("empty id".into());
    }
    let station = registry
        .parse(&raw.station)
        .ok_or_else(|| format!("unknown station `{}`", raw.station))?;
    if raw.text.trim().is_empty() {
        return Err("empty text".into());
    }
    let air_time = NaiveTime::parse_from_str(&raw.air_time, "%H:%M")
        .map_err(|_| format!("air_time `{}` is not HH:MM", raw.air_time))?;
    if raw.duration_min <= 0 || raw.duration_min > u32::MAX as i64 {
        return Err(format!("duration_min must be positive, got {}", raw.duration_min));
    }
    let len = raw.text.chars().count() as i64;
    let mut prev_end = 0i64;
    for &[start, end] in &raw.ad_spans {
        if start < 0 || end <= start {
            return Err(format!("invalid ad span [{start},{end})"));
        }
        if end > len {
            return Err(format!("ad span [{start},{end}) exceeds text length {len}"));
        }
        if start < prev_end {
            return Err(format!("ad span [{start},{end}) overlaps or is out of order"));
        }
        prev_end = end;
    }
    Ok(Episode {
        id: raw.id,
        station,
        program_title: raw.program_title,
        category: raw.category,
        air_date: raw.air_date,
        air_time,
        duration_min: raw.duration_min as u32,
        text: raw.text,
        ad_spans: raw
            .ad_spans
            .iter()
            .map(|&[s, e]| [s as usize, e as usize])
            .collect(),
    })
}

/// Removes every ad span from the transcript, keeping the remaining
/// characters in order.
pub fn strip_ads(episode: &Episode) -> String {
    if episode.ad_spans.is_empty() {
        return episode.text.clone();
    }
    let mut spans = episode.ad_spans.iter().peekable();
    let mut out = String::with_capacity(episode.text.len());
    for (i, ch) in episode.text.chars().enumerate() {
        while let Some(&&[_, end]) = spans.peek() {
            if i >= end {
                spans.next();
            } else {
                break;
            }
        }
        match spans.peek() {
            Some(&&[start, end]) if i >= start && i < end => {}
            _ => out.push(ch),
        }
    }
    out
}
