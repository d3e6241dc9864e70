//! Figure-data CSVs. Each file opens with `#` comment lines carrying the
//! config hash, format version and stage input digests. Rows come out in a
//! fixed order and carry no timestamps, so equal inputs give equal bytes.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::artifact::write_atomic;
use super::outputs::{ConsumptionOutput, DivergenceOutput, PolarizationOutput};
use crate::error::{Error, Result};
use crate::metrics::smooth;
use crate::polarize::SeriesPoint;

pub const FIGURE_FILES: [&str; 7] = [
    "fig1_topic_shares.csv",
    "fig2_divergence.csv",
    "fig3_polarization.csv",
    "fig4_topic_polarization.csv",
    "fig5_program_scores.csv",
    "fig6_consumption.csv",
    "segment_scores.csv",
];

#[derive(Clone, Debug)]
pub struct ExportHeader {
    pub config_hash: String,
    pub format_version: u32,
    /// Upstream stage name and output fingerprint.
    pub stage_inputs: Vec<(String, String)>,
    pub smoothing_days: u32,
}

/// Shortest round-trip form; negative zero prints as 0.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        x.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Table {
    comments: Vec<String>,
    rows: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &ExportHeader, smoothed: bool, columns: &[&str]) -> Result<Self> {
        let mut comments = vec![
            format!("format_version={}", header.format_version),
            format!("config_hash={}", header.config_hash),
        ];
        let inputs: Vec<String> = header.stage_inputs.iter().map(|(s, h)| format!("{s}:{h}")).collect();
        comments.push(format!("stage_inputs={}", inputs.join(",")));
        if smoothed {
            comments.push(format!("smoothing=centered_rolling_mean window_days={}", header.smoothing_days));
        }
        let mut t = Table {
            comments,
            rows: csv::Writer::from_writer(Vec::new()),
        };
        t.row(columns.iter().map(|c| c.to_string()))?;
        Ok(t)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<()> {
        self.rows
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .map_err(|e| Error::Validation(format!("csv: {e}")))
    }

    fn save(self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        for c in &self.comments {
            bytes.extend_from_slice(b"# ");
            bytes.extend_from_slice(c.as_bytes());
            bytes.push(b'\n');
        }
        let body = self.rows.into_inner().map_err(|e| Error::Validation(format!("csv: {e}")))?;
        bytes.extend_from_slice(&body);
        write_atomic(path, &bytes)
    }
}

/// Smoothed values aligned with `points`; gaps stay empty and are skipped
/// by the rolling mean.
fn smoothed(points: &[(NaiveDate, Option<f64>)], days: u32) -> Result<Vec<Option<f64>>> {
    let present: Vec<(NaiveDate, f64)> = points.iter().filter_map(|&(d, v)| v.map(|v| (d, v))).collect();
    let (s, _) = smooth(&present, days)?;
    let mut it = s.into_iter().peekable();
    Ok(points
        .iter()
        .map(|&(d, v)| {
            v?;
            match it.peek() {
                Some(&(sd, sv)) if sd == d => {
                    it.next();
                    Some(sv)
                }
                _ => None,
            }
        })
        .collect())
}

fn series_rows(t: &mut Table, points: &[SeriesPoint], smooth_days: Option<u32>) -> Result<()> {
    // one run of consecutive points per (source, target, filters)
    let mut start = 0;
    while start < points.len() {
        let key = |p: &SeriesPoint| (p.source.clone(), p.target.clone(), p.category_filter.clone(), p.topic_filter.clone());
        let mut end = start;
        while end < points.len() && key(&points[end]) == key(&points[start]) {
            end += 1;
        }
        let run = &points[start..end];
        let sm = match smooth_days {
            Some(d) => smoothed(&run.iter().map(|p| (p.window_start, p.pi_lo)).collect::<Vec<_>>(), d)?,
            None => vec![None; run.len()],
        };
        for (p, s) in run.iter().zip(sm) {
            let mut row = vec![
                p.window_start.to_string(),
                p.window_end.to_string(),
                p.source.clone(),
                p.target.clone(),
                p.category_filter.clone(),
                p.topic_filter.clone(),
                opt(p.pi_lo),
            ];
            if smooth_days.is_some() {
                row.push(opt(s));
            }
            row.extend([p.n_source.to_string(), p.n_target.to_string(), p.flag.clone().unwrap_or_default()]);
            t.row(row)?;
        }
        start = end;
    }
    Ok(())
}

pub fn write_figures(
    dir: &Path,
    header: &ExportHeader,
    pol: &PolarizationOutput,
    div: &DivergenceOutput,
    con: &ConsumptionOutput,
) -> Result<Vec<PathBuf>> {
    let days = header.smoothing_days;
    let paths: Vec<PathBuf> = FIGURE_FILES.iter().map(|f| dir.join(f)).collect();

    let mut t = Table::new(header, true, &["station", "topic", "date", "share", "share_smoothed"])?;
    for s in &div.shares {
        let pts: Vec<(NaiveDate, Option<f64>)> = s.points.iter().map(|p| (p.date, Some(p.y))).collect();
        for (p, sm) in s.points.iter().zip(smoothed(&pts, days)?) {
            t.row([s.station.to_string(), s.topic.clone(), p.date.to_string(), num(p.y), opt(sm)])?;
        }
    }
    t.save(&paths[0])?;

    let mut t = Table::new(
        header,
        true,
        &["station_i", "station_j", "k", "aggregation", "window_start", "window_end", "delta", "delta_smoothed"],
    )?;
    for s in &div.series {
        let pts: Vec<(NaiveDate, Option<f64>)> = s.points.iter().map(|p| (p.window_start, p.delta)).collect();
        let agg = serde_json::to_value(s.aggregation)?.as_str().unwrap_or_default().to_string();
        for (p, sm) in s.points.iter().zip(smoothed(&pts, days)?) {
            t.row([
                s.station_i.to_string(),
                s.station_j.to_string(),
                s.k.to_string(),
                agg.clone(),
                p.window_start.to_string(),
                p.window_end.to_string(),
                opt(p.delta),
                opt(sm),
            ])?;
        }
    }
    t.save(&paths[1])?;

    let series_cols = ["window_start", "window_end", "source", "target", "category_filter", "topic_filter", "pi_lo"];
    let tail = ["n_source", "n_target", "flag"];
    let cols: Vec<&str> = series_cols.iter().chain(&["pi_lo_smoothed"]).chain(&tail).copied().collect();
    let mut t = Table::new(header, true, &cols)?;
    series_rows(&mut t, &pol.over_time, Some(days))?;
    t.save(&paths[2])?;

    let cols: Vec<&str> = series_cols.iter().chain(&tail).copied().collect();
    let mut t = Table::new(header, false, &cols)?;
    series_rows(&mut t, &pol.by_era, None)?;
    t.save(&paths[3])?;

    let mut cols = vec!["station", "program", "topic", "n", "mean", "sd"];
    let deciles: Vec<String> = (1..=9).map(|d| format!("p{}", d * 10)).collect();
    cols.extend(deciles.iter().map(String::as_str));
    let mut t = Table::new(header, false, &cols)?;
    for p in &pol.programs {
        let mut row = vec![
            p.station.to_string(),
            p.program.clone(),
            p.topic.clone(),
            p.n.to_string(),
            num(p.mean),
            num(p.sd),
        ];
        row.extend(p.deciles.iter().copied().map(num));
        t.row(row)?;
    }
    t.save(&paths[4])?;

    let mut t = Table::new(
        header,
        false,
        &["month", "panel", "stations", "threshold", "min_minutes", "numerator", "denominator", "share"],
    )?;
    for r in &con.rows {
        let s = &r.shares;
        let stations: Vec<&str> = s.stations.iter().map(|s| s.as_str()).collect();
        t.row([
            s.month.to_string(),
            r.panel.clone(),
            if stations.is_empty() { r.label.clone() } else { stations.join("+") },
            opt(s.threshold),
            con.min_minutes.to_string(),
            num(s.numerator),
            num(s.denominator),
            num(s.share),
        ])?;
    }
    t.save(&paths[5])?;

    let mut t = Table::new(
        header,
        false,
        &["segment_id", "station", "program", "topic", "source", "side", "score", "own_score"],
    )?;
    for r in &pol.scores {
        let side = serde_json::to_value(r.side)?.as_str().unwrap_or_default().to_string();
        t.row([
            r.segment_id.clone(),
            r.station.to_string(),
            r.program.clone(),
            r.topic.clone(),
            r.source.clone(),
            side,
            opt(r.score),
            opt(r.own_score),
        ])?;
    }
    t.save(&paths[6])?;

    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, day).unwrap()
    }

    #[test]
    fn smoothing_skips_gaps() {
        let pts = [(d(1), Some(1.0)), (d(2), None), (d(3), Some(3.0))];
        assert_eq!(smoothed(&pts, 1).unwrap(), vec![Some(1.0), None, Some(3.0)]);
        // a 5-day window around day 1 reaches day 3
        assert_eq!(smoothed(&pts, 5).unwrap(), vec![Some(2.0), None, Some(2.0)]);
    }

    #[test]
    fn header_lines_precede_csv() {
        let h = ExportHeader {
            config_hash: "abc".into(),
            format_version: 1,
            stage_inputs: vec![("x".into(), "00".into())],
            smoothing_days: 3,
        };
        let dir = std::env::temp_dir().join(format!("tvp_export_{}", std::process::id()));
        let path = dir.join("t.csv");
        let mut t = Table::new(&h, true, &["a", "b"]).unwrap();
        t.row(["1".to_string(), "x,y".to_string()]).unwrap();
        t.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# format_version=1\n# config_hash=abc\n# stage_inputs=x:00\n# smoothing=centered_rolling_mean window_days=3\na,b\n1,\"x,y\"\n"
        );
        std::fs::remove_dir_all(dir).unwrap();
    }
}
