use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Lexicon, TokenId};
use crate::error::{Error, Result};

/// A masked slot: `tokens[span]` is hidden and must be predicted from the
/// remaining tokens. Token ids refer to the corpus lexicon.
#[derive(Clone, Debug)]
pub struct MaskQuery<'a> {
    pub segment_id: &'a str,
    pub tokens: &'a [TokenId],
    pub span: Range<usize>,
}

/// `word` indexes the oracle's own [`ReplacementOracle::vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub word: u32,
    pub score: f64,
}

/// Ranked replacement candidates for a masked slot. Implementations are
/// deterministic and safe to query from many threads at once; returned
/// lists hold at most `k` distinct words in descending score order.
pub trait ReplacementOracle: Send + Sync {
    fn vocabulary(&self) -> &Lexicon;

    fn predict(&self, query: &MaskQuery<'_>, k: usize) -> Vec<Prediction>;

    fn predict_words(&self, query: &MaskQuery<'_>, k: usize) -> Vec<String> {
        self.predict(query, k)
            .into_iter()
            .map(|p| self.vocabulary().word(p.word).to_string())
            .collect()
    }
}

/// One line of a precomputed prediction file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub segment_id: String,
    pub position: usize,
    pub top_k: Vec<String>,
}

/// Serves predictions computed offline (e.g. by an external masked language
/// model), keyed by segment id and the first masked token position.
/// Unknown slots predict nothing.
#[derive(Clone, Debug, Default)]
pub struct FileOracle {
    vocabulary: Lexicon,
    slots: HashMap<(String, usize), Vec<u32>>,
}

impl FileOracle {
    pub fn from_records(records: impl IntoIterator<Item = PredictionRecord>) -> Result<Self> {
        let mut oracle = FileOracle::default();
        for (i, rec) in records.into_iter().enumerate() {
            let mut ids = Vec::with_capacity(rec.top_k.len());
            for word in &rec.top_k {
                let toks = tokenize(word);
                if toks.len() != 1 {
                    return Err(Error::Record {
                        line: i + 1,
                        reason: format!("prediction `{word}` is not a single normalized token"),
                    });
                }
                let id = oracle.vocabulary.intern(&toks[0]);
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
            oracle.slots.insert((rec.segment_id, rec.position), ids);
        }
        Ok(oracle)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in data.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line).map_err(|e| Error::Record {
                line: i + 1,
                reason: e.to_string(),
            })?);
        }
        Self::from_records(records)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

impl ReplacementOracle for FileOracle {
    fn vocabulary(&self) -> &Lexicon {
        &self.vocabulary
    }

    fn predict(&self, query: &MaskQuery<'_>, k: usize) -> Vec<Prediction> {
        let key = (query.segment_id.to_string(), query.span.start);
        let Some(ids) = self.slots.get(&key) else {
            return Vec::new();
        };
        let n = ids.len().max(1) as f64;
        ids.iter()
            .take(k)
            .enumerate()
            .map(|(rank, &word)| Prediction {
                word,
                score: 1.0 - rank as f64 / n,
            })
            .collect()
    }
}
