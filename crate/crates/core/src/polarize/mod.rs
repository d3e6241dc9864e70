//! Leave-out polarization between two groups of segments.
//!
//! Each segment `i` is a phrase-count vector `c_i` with total `m_i` and
//! frequencies `q_i = c_i / m_i`. For a phrase `p`, `rho[p]` is the source
//! group's share of the combined source + target mass. The leave-out
//! estimate averages, per group, the dot product of a segment's
//! frequencies with its own group's share computed with that segment
//! removed, then takes the mean of the two group averages. Group totals are
//! accumulated once; each segment's leave-out share comes from subtracting
//! its own integer counts, so the cost per segment is `O(nnz(c_i))`.

mod series;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{PhraseKey, PhraseVector};
use crate::error::{Error, Result};
use crate::exec::Exec;

pub use series::{polarization_series, SeriesPoint, SeriesSpec, SegmentFilter};

/// How group masses turn into the per-phrase share `rho`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoNormalization {
    /// `rho = C_s / (C_s + C_t)` on raw (leave-out) phrase counts.
    #[default]
    Counts,
    /// `rho = q_s / (q_s + q_t)` with `q_G = C_G / M_G`, each group's counts
    /// divided by its own (leave-out) phrase total.
    Frequencies,
}

/// What to do with a phrase whose leave-out denominator is zero, i.e. a
/// phrase that occurs only in the held-out segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDenominator {
    /// Use the uninformative share 0.5.
    #[default]
    Neutral,
    /// Skip the phrase and renormalize the segment's frequencies over the
    /// remaining phrases. A segment left with no phrases is excluded.
    Drop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EstimatorOptions {
    pub normalization: RhoNormalization,
    pub zero_policy: ZeroDenominator,
    pub exec: Exec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    LeaveOut,
    PlugIn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

/// The segments of one side of a comparison, with their summed counts.
#[derive(Clone, Debug)]
pub struct GroupCorpus {
    label: String,
    ids: Vec<String>,
    vectors: Vec<PhraseVector>,
    totals: HashMap<PhraseKey, u64>,
    total_m: u64,
}

impl GroupCorpus {
    /// Members are ordered by id; empty phrase vectors are excluded.
    pub fn new(label: impl Into<String>, members: Vec<(String, PhraseVector)>) -> Result<Self> {
        let label = label.into();
        let mut members: Vec<_> = members.into_iter().filter(|(_, v)| !v.is_empty()).collect();
        if members.is_empty() {
            return Err(Error::InsufficientData(format!(
                "group `{label}` has no segment with a non-empty phrase vector"
            )));
        }
        members.sort_by(|a, b| a.0.cmp(&b.0));
        let mut totals: HashMap<PhraseKey, u64> = HashMap::new();
        let mut total_m = 0;
        for (_, v) in &members {
            for &(k, c) in v.entries() {
                *totals.entry(k).or_default() += c as u64;
            }
            total_m += v.total();
        }
        let (ids, vectors) = members.into_iter().unzip();
        Ok(GroupCorpus {
            label,
            ids,
            vectors,
            totals,
            total_m,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn segment_count(&self) -> usize {
        self.vectors.len()
    }

    pub fn total_m(&self) -> u64 {
        self.total_m
    }

    pub fn total(&self, key: PhraseKey) -> u64 {
        self.totals.get(&key).copied().unwrap_or(0)
    }

    pub fn members(&self) -> impl Iterator<Item = (&str, &PhraseVector)> {
        self.ids.iter().map(String::as_str).zip(&self.vectors)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RhoVector {
    values: HashMap<PhraseKey, f64>,
}

impl RhoVector {
    pub fn get(&self, key: PhraseKey) -> Option<f64> {
        self.values.get(&key).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PhraseKey, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationEstimate {
    pub estimator: Estimator,
    pub value: f64,
    pub source: String,
    pub target: String,
    pub n_source: usize,
    pub n_target: usize,
    pub normalization: RhoNormalization,
}

/// Per-segment scores. `score` is `q_i . rho_{-i}` (the source-share
/// convention for both groups); `own_score` is the share of the segment's
/// own group, i.e. `q_i . (1 - rho_{-i})` for target segments. A segment
/// excluded under [`ZeroDenominator::Drop`] carries `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartisanScore {
    pub segment_id: String,
    pub side: Side,
    pub score: Option<f64>,
    pub own_score: Option<f64>,
}

/// Share of `own` mass against `other` mass for one phrase. `own_m` and
/// `other_m` are the group phrase totals used under frequency
/// normalization. `None` when the denominator vanishes.
#[inline]
fn share(norm: RhoNormalization, own: u64, other: u64, own_m: u64, other_m: u64) -> Option<f64> {
    match norm {
        RhoNormalization::Counts => {
            let den = own + other;
            (den > 0).then(|| own as f64 / den as f64)
        }
        RhoNormalization::Frequencies => {
            let qo = if own_m > 0 { own as f64 / own_m as f64 } else { 0.0 };
            let qx = if other_m > 0 { other as f64 / other_m as f64 } else { 0.0 };
            let den = qo + qx;
            (den > 0.0).then(|| qo / den)
        }
    }
}

/// Full-sample `rho` over every phrase present in either group.
pub fn rho(source: &GroupCorpus, target: &GroupCorpus, norm: RhoNormalization) -> RhoVector {
    let mut values = HashMap::with_capacity(source.totals.len() + target.totals.len());
    for &k in source.totals.keys().chain(target.totals.keys()) {
        values.entry(k).or_insert_with(|| {
            share(norm, source.total(k), target.total(k), source.total_m, target.total_m)
                .expect("phrase present in a group has positive mass")
        });
    }
    RhoVector { values }
}

/// Scores of one segment against (own, other) groups: returns
/// (own-group share, source share) dot products.
fn segment_scores(
    v: &PhraseVector,
    own: &GroupCorpus,
    other: &GroupCorpus,
    leave_out: bool,
    opts: &EstimatorOptions,
) -> (Option<f64>, Option<f64>) {
    let own_m = if leave_out { own.total_m - v.total() } else { own.total_m };
    let mut own_dot = 0.0;
    let mut other_dot = 0.0;
    let mut used = 0u64;
    for &(k, c) in v.entries() {
        let own_c = if leave_out { own.total(k) - c as u64 } else { own.total(k) };
        let other_c = other.total(k);
        let own_share = share(opts.normalization, own_c, other_c, own_m, other.total_m);
        let other_share = share(opts.normalization, other_c, own_c, other.total_m, own_m);
        match (own_share, other_share, opts.zero_policy) {
            (Some(a), Some(b), _) => {
                own_dot += c as f64 * a;
                other_dot += c as f64 * b;
                used += c as u64;
            }
            (_, _, ZeroDenominator::Neutral) => {
                own_dot += c as f64 * 0.5;
                other_dot += c as f64 * 0.5;
                used += c as u64;
            }
            (_, _, ZeroDenominator::Drop) => {}
        }
    }
    if used == 0 {
        return (None, None);
    }
    let m = used as f64;
    (Some(own_dot / m), Some(other_dot / m))
}

fn score_groups(
    source: &GroupCorpus,
    target: &GroupCorpus,
    leave_out: bool,
    opts: &EstimatorOptions,
) -> Vec<PartisanScore> {
    let mut out = Vec::with_capacity(source.segment_count() + target.segment_count());
    for (side, own, other) in [(Side::Source, source, target), (Side::Target, target, source)] {
        let scored = opts
            .exec
            .map(&own.vectors, |v| segment_scores(v, own, other, leave_out, opts));
        for (id, (own_score, other_score)) in own.ids.iter().zip(scored) {
            let score = match side {
                Side::Source => own_score,
                Side::Target => other_score,
            };
            out.push(PartisanScore {
                segment_id: id.clone(),
                side,
                score,
                own_score,
            });
        }
    }
    out
}

fn check_sizes(source: &GroupCorpus, target: &GroupCorpus) -> Result<()> {
    for g in [source, target] {
        if g.segment_count() < 2 {
            return Err(Error::InsufficientData(format!(
                "group `{}` has {} non-empty segment(s); the leave-out estimator needs at least 2",
                g.label,
                g.segment_count()
            )));
        }
    }
    Ok(())
}

fn estimate(
    source: &GroupCorpus,
    target: &GroupCorpus,
    estimator: Estimator,
    opts: &EstimatorOptions,
) -> Result<PolarizationEstimate> {
    check_sizes(source, target)?;
    let scores = score_groups(source, target, estimator == Estimator::LeaveOut, opts);
    // sequential reduction in segment-id order keeps the value bit-stable
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for s in &scores {
        if let Some(v) = s.own_score {
            let i = s.side as usize;
            sums[i] += v;
            counts[i] += 1;
        }
    }
    if counts.contains(&0) {
        return Err(Error::InsufficientData(
            "every segment of a group was dropped by the zero-denominator policy".into(),
        ));
    }
    let value = 0.5 * (sums[0] / counts[0] as f64) + 0.5 * (sums[1] / counts[1] as f64);
    Ok(PolarizationEstimate {
        estimator,
        value,
        source: source.label.clone(),
        target: target.label.clone(),
        n_source: counts[0],
        n_target: counts[1],
        normalization: opts.normalization,
    })
}

pub fn leave_out_estimate(
    source: &GroupCorpus,
    target: &GroupCorpus,
    opts: &EstimatorOptions,
) -> Result<PolarizationEstimate> {
    estimate(source, target, Estimator::LeaveOut, opts)
}

/// Same average with each segment's own counts left in the shares.
/// Biased upward in finite samples; kept as a diagnostic.
pub fn plug_in_estimate(
    source: &GroupCorpus,
    target: &GroupCorpus,
    opts: &EstimatorOptions,
) -> Result<PolarizationEstimate> {
    estimate(source, target, Estimator::PlugIn, opts)
}

/// Leave-out scores for every segment of both groups, source first, each
/// group in id order.
pub fn partisan_scores(
    source: &GroupCorpus,
    target: &GroupCorpus,
    opts: &EstimatorOptions,
) -> Result<Vec<PartisanScore>> {
    check_sizes(source, target)?;
    Ok(score_groups(source, target, true, opts))
}

#[cfg(test)]
mod tests;
