//! Transcript ingestion, ad removal, segmentation and phrase counting.

mod episode;
mod phrase;
mod segment;
mod snapshot;

pub use episode::{
    BROADCAST, CABLE, ingest_episodes, parse_episodes, strip_ads, Episode, IngestReport, ProgramCategory,
    RecordIssue, StationId, StationRegistry,
};
pub use phrase::{
    phrase_counts, tokenize, Lexicon, PhraseFilter, PhraseKey, PhraseVector, TokenId,
};
pub use segment::{segment_episode, split_words, Segment, DEFAULT_MAX_WORDS, SEPARATOR};
pub use snapshot::{build_corpus, Corpus, SNAPSHOT_FORMAT_VERSION};
