//! Layer-1 weak supervision: expand each topic's label word into a
//! dictionary of substitutable words, then flag every segment in which some
//! masked position's predicted replacements overlap a dictionary enough.

mod distributional;
mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Lexicon, TokenId};
use crate::error::{Error, Result};
use crate::exec::Exec;

pub use distributional::{distributional_oracle, DistributionalConfig, DistributionalOracle};
pub use oracle::{FileOracle, MaskQuery, Prediction, PredictionRecord, ReplacementOracle};

pub const DEFAULT_TOP_K: usize = 50;
pub const DEFAULT_VOCAB_CAP: usize = 100;
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.20;

/// Reserved annotation choice; no topic may use it as id.
pub const NONE_LABEL: &str = "none";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicLabel {
    pub id: String,
    /// Seed words; a multiword entry is masked as one slot.
    pub label_words: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicRegistry {
    topics: Vec<TopicLabel>,
}

impl TopicRegistry {
    pub fn new(topics: Vec<TopicLabel>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &topics {
            if t.id.is_empty() || t.id == NONE_LABEL {
                return Err(Error::Config(format!("invalid topic id `{}`", t.id)));
            }
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Config(format!("duplicate topic id `{}`", t.id)));
            }
            if t.label_words.iter().all(|w| w.trim().is_empty()) {
                return Err(Error::Config(format!("topic `{}` has no label words", t.id)));
            }
        }
        Ok(TopicRegistry { topics })
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn topics(&self) -> &[TopicLabel] {
        &self.topics
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.topics.iter().map(|t| t.id.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementList {
    pub segment_id: String,
    pub position: usize,
    pub words: Vec<String>,
}

/// Masks every occurrence of the topic's label words and keeps the
/// oracle's top-`k` replacements per occurrence, in corpus order.
pub fn collect_replacements(
    corpus: &Corpus,
    topic: &TopicLabel,
    oracle: &dyn ReplacementOracle,
    k: usize,
    exec: Exec,
) -> Vec<ReplacementList> {
    let phrases: Vec<Vec<TokenId>> = topic
        .label_words
        .iter()
        .filter_map(|w| corpus.lexicon.lookup_phrase(w))
        .filter(|p| !p.is_empty())
        .collect();
    if phrases.is_empty() {
        warn!("topic `{}`: no label word occurs in the corpus", topic.id);
        return Vec::new();
    }
    let per_segment = exec.map_indices(corpus.len(), |i| {
        let tokens = &corpus.tokens[i];
        let id = corpus.segments[i].id();
        let mut lists = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            match phrases.iter().find(|p| tokens[pos..].starts_with(p)) {
                Some(p) => {
                    let query = MaskQuery {
                        segment_id: &id,
                        tokens,
                        span: pos..pos + p.len(),
                    };
                    lists.push(ReplacementList {
                        segment_id: id.clone(),
                        position: pos,
                        words: oracle.predict_words(&query, k),
                    });
                    pos += p.len();
                }
                None => pos += 1,
            }
        }
        lists
    });
    let lists: Vec<ReplacementList> = per_segment.into_iter().flatten().collect();
    if lists.is_empty() {
        warn!("topic `{}`: no label word occurs in the corpus", topic.id);
    }
    lists
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassVocabulary {
    pub topic_id: String,
    /// (word, number of lists containing it), most frequent first.
    pub ranked_words: Vec<(String, u32)>,
}

impl ClassVocabulary {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.ranked_words.iter().map(|(w, _)| w.as_str())
    }
}

/// Ranks candidates by the number of lists they appear in (ties
/// lexicographic) and keeps the first `cap`.
pub fn build_class_vocabulary(
    topic_id: &str,
    lists: &[ReplacementList],
    cap: usize,
) -> Result<ClassVocabulary> {
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for list in lists {
        let distinct: BTreeSet<&str> = list.words.iter().map(String::as_str).collect();
        for w in distinct {
            *counts.entry(w).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::InsufficientData(format!(
            "topic `{topic_id}`: every replacement list is empty"
        )));
    }
    let mut ranked: Vec<(String, u32)> = counts.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(cap);
    Ok(ClassVocabulary {
        topic_id: topic_id.to_string(),
        ranked_words: ranked,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedDictionary {
    pub topic_id: String,
    pub words: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReviewAudit {
    pub removed: Vec<String>,
    /// Requested removals that were not in the vocabulary.
    pub not_found: Vec<String>,
}

/// Applies the reviewer's removals. An empty result is an error since the
/// topic could never be assigned.
pub fn review_vocabulary(
    vocab: &ClassVocabulary,
    removals: &BTreeSet<String>,
) -> Result<(ExpandedDictionary, ReviewAudit)> {
    let mut audit = ReviewAudit::default();
    let mut words = BTreeSet::new();
    for w in vocab.words() {
        if removals.contains(w) {
            audit.removed.push(w.to_string());
        } else {
            words.insert(w.to_string());
        }
    }
    let in_vocab: HashSet<&str> = vocab.words().collect();
    for r in removals {
        if !in_vocab.contains(r.as_str()) {
            warn!("topic `{}`: removal `{r}` is not in the class vocabulary", vocab.topic_id);
            audit.not_found.push(r.clone());
        }
    }
    if words.is_empty() {
        return Err(Error::Validation(format!(
            "topic `{}`: review removed every word; the topic is unusable",
            vocab.topic_id
        )));
    }
    Ok((
        ExpandedDictionary {
            topic_id: vocab.topic_id.clone(),
            words,
        },
        audit,
    ))
}

/// One reviewer's decision for a topic, as stored in the review file.
/// Words listed in `remove` are dropped; when `allow` is present, every
/// ranked word outside it is dropped too.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewDecision {
    pub topic_id: String,
    #[serde(default)]
    pub remove: Vec<String>,
    #[serde(default)]
    pub allow: Option<Vec<String>>,
}

impl ReviewDecision {
    pub fn removals(&self, vocab: &ClassVocabulary) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.remove.iter().cloned().collect();
        if let Some(allow) = &self.allow {
            let allow: HashSet<&str> = allow.iter().map(String::as_str).collect();
            out.extend(vocab.words().filter(|w| !allow.contains(w)).map(str::to_string));
        }
        out
    }
}

/// Dictionary file record; hand-editable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryRecord {
    pub topic_id: String,
    pub ranked_words: Vec<String>,
    pub removals: Vec<String>,
    pub final_words: Vec<String>,
}

impl DictionaryRecord {
    pub fn new(vocab: &ClassVocabulary, removals: &BTreeSet<String>, dict: &ExpandedDictionary) -> Self {
        DictionaryRecord {
            topic_id: vocab.topic_id.clone(),
            ranked_words: vocab.words().map(str::to_string).collect(),
            removals: removals.iter().cloned().collect(),
            final_words: dict.words.iter().cloned().collect(),
        }
    }

    /// Final words must come from the ranked vocabulary.
    pub fn validate(&self) -> Result<()> {
        let ranked: HashSet<&str> = self.ranked_words.iter().map(String::as_str).collect();
        if let Some(w) = self.final_words.iter().find(|w| !ranked.contains(w.as_str())) {
            return Err(Error::Validation(format!(
                "topic `{}`: final word `{w}` is not in ranked_words",
                self.topic_id
            )));
        }
        if self.final_words.is_empty() {
            return Err(Error::Validation(format!("topic `{}`: empty dictionary", self.topic_id)));
        }
        Ok(())
    }

    pub fn dictionary(&self) -> ExpandedDictionary {
        ExpandedDictionary {
            topic_id: self.topic_id.clone(),
            words: self.final_words.iter().cloned().collect(),
        }
    }
}

/// Dictionaries resolved into the oracle's vocabulary. Words the oracle
/// cannot predict are dropped.
#[derive(Clone, Debug)]
pub struct CompiledDictionaries {
    topic_ids: Vec<String>,
    /// oracle word id -> indices of topics containing it
    membership: Vec<Vec<u16>>,
}

impl CompiledDictionaries {
    pub fn compile(dictionaries: &[ExpandedDictionary], vocabulary: &Lexicon) -> Result<Self> {
        if dictionaries.is_empty() {
            return Err(Error::InvalidArgument("no dictionaries".into()));
        }
        let mut membership = vec![Vec::new(); vocabulary.len()];
        for (z, dict) in dictionaries.iter().enumerate() {
            for w in &dict.words {
                if let Some(id) = vocabulary.get(w) {
                    membership[id as usize].push(z as u16);
                }
            }
        }
        Ok(CompiledDictionaries {
            topic_ids: dictionaries.iter().map(|d| d.topic_id.clone()).collect(),
            membership,
        })
    }

    pub fn topic_ids(&self) -> &[String] {
        &self.topic_ids
    }
}

/// Per-topic maximum overlap fraction for one segment. Only topics with a
/// positive score are stored, in topic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakLabel {
    pub segment_id: String,
    pub scores: Vec<(String, f64)>,
    pub threshold: f64,
}

impl WeakLabel {
    pub fn score(&self, topic: &str) -> f64 {
        self.scores
            .iter()
            .find(|(t, _)| t == topic)
            .map_or(0.0, |&(_, s)| s)
    }

    /// Topics whose score reaches `threshold` (inclusive).
    pub fn topics_at(&self, threshold: f64) -> Vec<&str> {
        self.scores
            .iter()
            .filter(|(_, s)| *s >= threshold)
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn topics(&self) -> Vec<&str> {
        self.topics_at(self.threshold)
    }

    pub fn has(&self, topic: &str) -> bool {
        self.score(topic) >= self.threshold
    }
}

/// Masks each token in turn; at each position the overlap with a topic is
/// `|top-k ∩ dictionary| / k`. A topic's score is its best position.
pub fn weak_classify(
    segment_id: &str,
    tokens: &[TokenId],
    dictionaries: &CompiledDictionaries,
    oracle: &dyn ReplacementOracle,
    k: usize,
    threshold: f64,
) -> WeakLabel {
    let n_topics = dictionaries.topic_ids.len();
    let mut best = vec![0u32; n_topics];
    let mut hits = vec![0u32; n_topics];
    for pos in 0..tokens.len() {
        let query = MaskQuery {
            segment_id,
            tokens,
            span: pos..pos + 1,
        };
        hits.iter_mut().for_each(|h| *h = 0);
        for p in oracle.predict(&query, k) {
            if let Some(topics) = dictionaries.membership.get(p.word as usize) {
                for &z in topics {
                    hits[z as usize] += 1;
                }
            }
        }
        for (b, &h) in best.iter_mut().zip(&hits) {
            *b = (*b).max(h);
        }
    }
    let scores = best
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > 0)
        .map(|(z, &b)| (dictionaries.topic_ids[z].clone(), b as f64 / k as f64))
        .collect();
    WeakLabel {
        segment_id: segment_id.to_string(),
        scores,
        threshold,
    }
}

pub fn weak_classify_corpus(
    corpus: &Corpus,
    dictionaries: &CompiledDictionaries,
    oracle: &dyn ReplacementOracle,
    k: usize,
    threshold: f64,
    exec: Exec,
) -> Vec<WeakLabel> {
    exec.map_indices(corpus.len(), |i| {
        weak_classify(
            &corpus.segments[i].id(),
            &corpus.tokens[i],
            dictionaries,
            oracle,
            k,
            threshold,
        )
    })
}
