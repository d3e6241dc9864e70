use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::Episode;
use super::phrase::{phrase_counts, Lexicon, PhraseFilter, PhraseVector, TokenId};
use super::segment::{segment_episode, Segment};
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"TVPC";

/// Immutable segmented corpus: segments ordered by (episode id, index),
/// their token ids, and their filtered phrase vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub config_hash: String,
    pub lexicon: Lexicon,
    pub segments: Vec<Segment>,
    pub tokens: Vec<Vec<TokenId>>,
    pub phrases: Vec<PhraseVector>,
}

pub fn build_corpus<'a>(
    episodes: &[Episode],
    max_words: usize,
    stopwords: impl IntoIterator<Item = &'a str>,
    confounders: impl IntoIterator<Item = &'a str>,
    config_hash: &str,
    exec: Exec,
) -> Corpus {
    let mut order: Vec<&Episode> = episodes.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let per_episode = exec.map(&order, |ep| segment_episode(ep, max_words));
    let segments: Vec<Segment> = per_episode.into_iter().flatten().collect();

    // interning is sequential so ids depend only on corpus order
    let mut lexicon = Lexicon::default();
    let tokens: Vec<Vec<TokenId>> = segments.iter().map(|s| lexicon.encode(&s.text)).collect();

    let filter = PhraseFilter::new(&lexicon, stopwords, confounders);
    let phrases = exec.map(&tokens, |t| phrase_counts(t, &filter));

    Corpus {
        config_hash: config_hash.to_string(),
        lexicon,
        segments,
        tokens,
        phrases,
    }
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment_ids(&self) -> Vec<String> {
        self.segments.iter().map(Segment::id).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&SNAPSHOT_FORMAT_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Validation("not a corpus snapshot".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != SNAPSHOT_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "snapshot format version {version}, expected {SNAPSHOT_FORMAT_VERSION}"
            )));
        }
        Ok(bincode::deserialize(&bytes[8..])?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ProgramCategory, StationId};
    use chrono::{NaiveDate, NaiveTime};

    fn ep(id: &str, text: &str) -> Episode {
        Episode {
            id: id.into(),
            station: StationId::new_unchecked("ABC"),
            program_title: "World News".into(),
            category: ProgramCategory::HardNews,
            air_date: NaiveDate::from_ymd_opt(2019, 5, 2).unwrap(),
            air_time: NaiveTime::from_hms_opt(18, 30, 0).unwrap(),
            duration_min: 30,
            text: text.into(),
            ad_spans: vec![],
        }
    }

    #[test]
    fn build_is_deterministic_and_ordered() {
        let eps = vec![ep("b", "second episode here."), ep("a", "first one. more words")];
        let c1 = build_corpus(&eps, 150, ["here"], [], "h", Exec::Sequential);
        let mut rev = eps.clone();
        rev.reverse();
        let c2 = build_corpus(&rev, 150, ["here"], [], "h", Exec::Parallel);
        assert_eq!(c1, c2);
        assert_eq!(c1.segment_ids(), vec!["a#0", "b#0"]);
        assert_eq!(c1.to_bytes().unwrap(), c2.to_bytes().unwrap());
    }

    #[test]
    fn snapshot_round_trip_and_version_guard() {
        let c = build_corpus(&[ep("a", "one two three")], 150, [], [], "h", Exec::Sequential);
        let bytes = c.to_bytes().unwrap();
        assert_eq!(Corpus::from_bytes(&bytes).unwrap(), c);
        let mut bad = bytes.clone();
        bad[4] = 99;
        assert!(Corpus::from_bytes(&bad).is_err());
        assert!(Corpus::from_bytes(b"nope").is_err());
    }
}
