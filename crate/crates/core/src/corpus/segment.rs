use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::episode::{strip_ads, Episode, ProgramCategory, StationId};

pub const DEFAULT_MAX_WORDS: usize = 150;

/// Joins segment texts back into the normalized ad-free transcript.
pub const SEPARATOR: &str = " ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub episode_id: String,
    pub index: u32,
    pub text: String,
    pub word_count: u32,
    pub station: StationId,
    pub program: String,
    pub category: ProgramCategory,
    pub air_date: NaiveDate,
}

impl Segment {
    pub fn id(&self) -> String {
        format!("{}#{}", self.episode_id, self.index)
    }
}

fn ends_sentence(word: &str) -> bool {
    matches!(word.chars().last(), Some('.' | '!' | '?'))
}

/// Greedy sentence packing over whitespace-delimited words.
///
/// Whole sentences accumulate until the next one would push the chunk past
/// `max_words`; a sentence longer than `max_words` is cut every `max_words`
/// words and its tail stays open for the following sentences.
pub fn split_words(text: &str, max_words: usize) -> Vec<Vec<&str>> {
    assert!(max_words >= 1, "max_words must be at least 1");
    let words: Vec<&str> = text.split_whitespace().collect();

    let mut sentences: Vec<&[&str]> = Vec::new();
    let mut start = 0;
    for (i, w) in words.iter().enumerate() {
        if ends_sentence(w) {
            sentences.push(&words[start..=i]);
            start = i + 1;
        }
    }
    if start < words.len() {
        sentences.push(&words[start..]);
    }

    let mut chunks: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for sentence in sentences {
        if current.len() + sentence.len() <= max_words {
            current.extend_from_slice(sentence);
            continue;
        }
        if !current.is_empty() {
            chunks.push(std::mem::take(&mut current));
        }
        let mut rest = sentence;
        while rest.len() > max_words {
            chunks.push(rest[..max_words].to_vec());
            rest = &rest[max_words..];
        }
        current.extend_from_slice(rest);
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

pub fn segment_episode(episode: &Episode, max_words: usize) -> Vec<Segment> {
    let clean = strip_ads(episode);
    split_words(&clean, max_words)
        .into_iter()
        .enumerate()
        .map(|(index, words)| Segment {
            episode_id: episode.id.clone(),
            index: index as u32,
            word_count: words.len() as u32,
            text: words.join(SEPARATOR),
            station: episode.station.clone(),
            program: episode.program_title.clone(),
            category: episode.category,
            air_date: episode.air_date,
        })
        .collect()
}
