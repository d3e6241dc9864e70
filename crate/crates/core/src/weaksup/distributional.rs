//! Windowed co-occurrence oracle: positive PMI word vectors, and slot
//! predictions ranked by cosine similarity with the bag of context words
//! around the masked span.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::oracle::{MaskQuery, Prediction, ReplacementOracle};
use crate::corpus::{Corpus, Lexicon, TokenId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributionalConfig {
    /// Context words taken on each side of a token or masked span.
    pub window: usize,
    /// Words rarer than this are neither contexts nor candidates.
    pub min_count: u32,
    /// Strongest entries kept per context column.
    pub column_cap: usize,
    /// Candidates below this cosine are never predicted.
    pub similarity_floor: f64,
    /// Context-distribution smoothing exponent.
    pub smoothing: f64,
}

impl Default for DistributionalConfig {
    fn default() -> Self {
        DistributionalConfig {
            window: 3,
            min_count: 2,
            column_cap: 128,
            similarity_floor: 0.05,
            smoothing: 0.75,
        }
    }
}

pub struct DistributionalOracle {
    lexicon: Lexicon,
    window: usize,
    floor: f64,
    active: Vec<bool>,
    /// context id -> (word id, weight) by descending weight
    columns: Vec<Vec<(u32, f32)>>,
}

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<u32>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

pub fn distributional_oracle(
    corpus: &Corpus,
    stopwords: &HashSet<TokenId>,
    config: &DistributionalConfig,
) -> DistributionalOracle {
    let n = corpus.lexicon.len();
    let mut freq = vec![0u32; n];
    for seg in &corpus.tokens {
        for &t in seg {
            freq[t as usize] += 1;
        }
    }
    let active: Vec<bool> = (0..n)
        .map(|t| freq[t] >= config.min_count && !stopwords.contains(&(t as TokenId)))
        .collect();

    let mut pairs: HashMap<u64, u32> = HashMap::new();
    for seg in &corpus.tokens {
        for (i, &w) in seg.iter().enumerate() {
            if !active[w as usize] {
                continue;
            }
            let hi = (i + config.window + 1).min(seg.len());
            for &c in &seg[i + 1..hi] {
                if active[c as usize] {
                    *pairs.entry(((w as u64) << 32) | c as u64).or_default() += 1;
                    *pairs.entry(((c as u64) << 32) | w as u64).or_default() += 1;
                }
            }
        }
    }

    let mut marginal = vec![0f64; n];
    for (&key, &count) in &pairs {
        marginal[(key >> 32) as usize] += count as f64;
    }
    let smoothed: Vec<f64> = marginal.iter().map(|m| m.powf(config.smoothing)).collect();
    let z: f64 = smoothed.iter().sum();

    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut entries: Vec<(u64, u32)> = pairs.into_iter().collect();
    entries.sort_unstable();
    for (key, count) in entries {
        let (w, c) = ((key >> 32) as usize, (key & 0xFFFF_FFFF) as usize);
        let pmi = (count as f64 * z / (marginal[w] * smoothed[c])).ln();
        if pmi > 0.0 {
            rows[w].push((c as u32, pmi));
        }
    }

    let mut columns: Vec<Vec<(u32, f32)>> = vec![Vec::new(); n];
    for (w, row) in rows.iter().enumerate() {
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for &(c, v) in row {
            columns[c as usize].push((w as u32, (v / norm) as f32));
        }
    }
    for col in &mut columns {
        col.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        col.truncate(config.column_cap);
    }

    DistributionalOracle {
        lexicon: corpus.lexicon.clone(),
        window: config.window,
        floor: config.similarity_floor,
        active,
        columns,
    }
}

impl DistributionalOracle {
    fn context(&self, query: &MaskQuery<'_>) -> Vec<TokenId> {
        let toks = query.tokens;
        let lo = query.span.start.saturating_sub(self.window);
        let hi = (query.span.end + self.window).min(toks.len());
        toks[lo..query.span.start.min(toks.len())]
            .iter()
            .chain(&toks[query.span.end.min(toks.len())..hi])
            .copied()
            .filter(|&t| self.active.get(t as usize).copied().unwrap_or(false))
            .collect()
    }
}

impl ReplacementOracle for DistributionalOracle {
    fn vocabulary(&self) -> &Lexicon {
        &self.lexicon
    }

    fn predict(&self, query: &MaskQuery<'_>, k: usize) -> Vec<Prediction> {
        let mut context = self.context(query);
        if context.is_empty() || k == 0 {
            return Vec::new();
        }
        context.sort_unstable();
        let mut weights: Vec<(TokenId, f64)> = Vec::with_capacity(context.len());
        for t in context {
            match weights.last_mut() {
                Some((last, w)) if *last == t => *w += 1.0,
                _ => weights.push((t, 1.0)),
            }
        }
        let slot_norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();

        SCRATCH.with(|cell| {
            let (acc, touched) = &mut *cell.borrow_mut();
            if acc.len() < self.lexicon.len() {
                acc.resize(self.lexicon.len(), 0.0);
            }
            for &(c, w) in &weights {
                for &(word, v) in &self.columns[c as usize] {
                    let slot = &mut acc[word as usize];
                    if *slot == 0.0 {
                        touched.push(word);
                    }
                    *slot += w * v as f64;
                }
            }
            let mut out: Vec<Prediction> = Vec::with_capacity(touched.len());
            for &word in touched.iter() {
                let score = acc[word as usize] / slot_norm;
                acc[word as usize] = 0.0;
                if score >= self.floor {
                    out.push(Prediction { word, score });
                }
            }
            touched.clear();
            let by_rank = |a: &Prediction, b: &Prediction| {
                b.score.total_cmp(&a.score).then(a.word.cmp(&b.word))
            };
            if out.len() > k {
                out.select_nth_unstable_by(k - 1, by_rank);
                out.truncate(k);
            }
            out.sort_unstable_by(by_rank);
            out
        })
    }
}
