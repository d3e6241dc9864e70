//! Synthetic data with known answers: planted-topic transcripts for six
//! stations whose wording drifts apart over time, the matching ground
//! truth, a simulated reviewer and annotators, and a viewing panel.

mod data;
mod panel;
mod words;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{resolve, AnnotationRecord, AnnotationTask, Choice, LabelStatus, SCHEMA_VERSION};
use crate::corpus::{Corpus, Episode, ProgramCategory, StationId, BROADCAST, CABLE};
use crate::error::{Error, Result};
use crate::metrics::{Month, PanelRecord};
use crate::weaksup::{ReviewDecision, TopicLabel};

pub use panel::generate_panel;
use words::WordBank;

pub use data::{fixture_config, simulate_annotation_file, write_fixture_dir, CONFIG_FILE};

pub const TOPIC_IDS: [&str; 24] = [
    "abortion", "immigration", "guns", "climate", "vaccines", "china", "russia", "economy",
    "taxes", "terrorism", "healthcare", "race", "policing", "elections", "education", "military",
    "trade", "crime", "energy", "pandemic", "drugs", "courts", "housing", "veterans",
];

pub const STOPWORDS: [&str; 32] = [
    "the", "a", "an", "of", "to", "and", "in", "is", "that", "for", "on", "with", "as", "it",
    "this", "we", "they", "he", "she", "was", "are", "be", "at", "by", "from", "have", "has",
    "not", "but", "or", "i", "am",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureConfig {
    pub seed: u64,
    pub topics: usize,
    pub segments_per_station: usize,
    pub stories_per_episode: usize,
    pub core_words: usize,
    pub frame_words: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Share of stories about one of the planted topics; the rest are
    /// off-topic chatter.
    pub topical_rate: f64,
    /// Chance that a story carries a short run of another topic's words.
    pub leak_rate: f64,
    /// Chance that a topical story names its topic's label word.
    pub label_rate: f64,
    pub ad_rate: f64,
    pub panelists: usize,
    pub panel_start: NaiveDate,
    pub panel_months: u32,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            seed: 20240611,
            topics: TOPIC_IDS.len(),
            segments_per_station: 8000,
            stories_per_episode: 6,
            core_words: 40,
            frame_words: 6,
            start: NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2022, 12, 31).unwrap(),
            topical_rate: 0.8,
            leak_rate: 0.3,
            label_rate: 0.7,
            ad_rate: 0.3,
            panelists: 400,
            panel_start: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            panel_months: 84,
        }
    }
}

impl FixtureConfig {
    /// A few hundred segments; quick enough for unit tests and smoke runs.
    pub fn small(seed: u64) -> Self {
        FixtureConfig {
            seed,
            topics: 6,
            segments_per_station: 120,
            panelists: 40,
            panel_months: 12,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(3..=TOPIC_IDS.len()).contains(&self.topics) {
            return Err(Error::Config(format!("fixture topics must be in 3..={}", TOPIC_IDS.len())));
        }
        if self.end <= self.start || self.segments_per_station == 0 || self.stories_per_episode == 0 {
            return Err(Error::Config("fixture needs a date range and a positive size".into()));
        }
        for (name, p) in [
            ("topical_rate", self.topical_rate),
            ("leak_rate", self.leak_rate),
            ("label_rate", self.label_rate),
            ("ad_rate", self.ad_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("fixture {name} must be a probability")));
            }
        }
        if self.core_words < 4 || self.frame_words == 0 {
            return Err(Error::Config("fixture needs at least 4 core words and 1 frame word per topic".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorySpan {
    pub topic: Option<String>,
    pub words: u32,
}

/// Planted topic of every story, in transcript order per episode.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub stories: BTreeMap<String, Vec<StorySpan>>,
}

impl FixtureTruth {
    /// Topic of each corpus segment: the story that supplied most of its
    /// words (earlier story on ties).
    pub fn segment_topics(&self, corpus: &Corpus) -> Result<Vec<Option<String>>> {
        let mut out = Vec::with_capacity(corpus.len());
        let mut offset = 0u32;
        let mut current: Option<&str> = None;
        for seg in &corpus.segments {
            if current != Some(seg.episode_id.as_str()) {
                current = Some(&seg.episode_id);
                offset = 0;
            }
            let stories = self.stories.get(&seg.episode_id).ok_or_else(|| {
                Error::Validation(format!("episode `{}` is not part of the fixture", seg.episode_id))
            })?;
            let (lo, hi) = (offset, offset + seg.word_count);
            let mut best: Option<(&StorySpan, u32)> = None;
            let mut start = 0u32;
            for story in stories {
                let end = start + story.words;
                let overlap = hi.min(end).saturating_sub(lo.max(start));
                if overlap > best.map_or(0, |b| b.1) {
                    best = Some((story, overlap));
                }
                start = end;
            }
            let (story, _) = best.ok_or_else(|| {
                Error::Validation(format!("segment {} lies past the planted stories", seg.id()))
            })?;
            out.push(story.topic.clone());
            offset = hi;
        }
        Ok(out)
    }
}

pub struct Fixture {
    pub config: FixtureConfig,
    pub episodes: Vec<Episode>,
    pub topics: Vec<TopicLabel>,
    pub stopwords: Vec<String>,
    /// Host and program names per station.
    pub confounders: BTreeMap<String, Vec<String>>,
    /// Words a careful reviewer would keep for each topic.
    pub topic_words: BTreeMap<String, BTreeSet<String>>,
    pub truth: FixtureTruth,
    pub panel: Vec<PanelRecord>,
}

impl Fixture {
    /// Reviewer decisions that keep only words planted for each topic.
    pub fn review_decisions(&self) -> Vec<ReviewDecision> {
        self.topic_words
            .iter()
            .map(|(topic, words)| ReviewDecision {
                topic_id: topic.clone(),
                remove: Vec::new(),
                allow: Some(words.iter().cloned().collect()),
            })
            .collect()
    }
}

struct Program {
    title: String,
    category: ProgramCategory,
    time: NaiveTime,
    hosts: Vec<String>,
}

struct Station {
    id: StationId,
    /// Negative leans left, positive right; zero is neutral.
    lean: f64,
    favored: Vec<usize>,
    programs: Vec<Program>,
}

fn stations(bank: &mut WordBank, rng: &mut ChaCha8Rng, n_topics: usize) -> Vec<Station> {
    let third = n_topics / 4;
    let block = |k: usize| (k * third..(k + 1) * third).collect::<Vec<_>>();
    let lean = |code: &str| match code {
        "FNC" => 1.0,
        "MSNBC" => -1.0,
        "CNN" => -0.8,
        "ABC" => -0.1,
        "NBC" => 0.05,
        _ => 0.0,
    };
    BROADCAST
        .iter()
        .chain(CABLE.iter())
        .map(|&code| {
            let cable = CABLE.contains(&code);
            let favored = match code {
                "FNC" => block(0),
                "CNN" | "MSNBC" => block(1),
                _ => block(2),
            };
            let slots: [(ProgramCategory, u32, u32); 3] = if cable {
                [
                    (ProgramCategory::HardNews, 12, 0),
                    (ProgramCategory::TalkShows, 18, 0),
                    (ProgramCategory::PartisanOpinion, 21, 0),
                ]
            } else {
                [
                    (ProgramCategory::HardNews, 18, 30),
                    (ProgramCategory::SoftNews, 7, 0),
                    (ProgramCategory::TalkShows, 10, 30),
                ]
            };
            let programs = slots
                .iter()
                .map(|&(category, h, m)| {
                    let title = format!("{} {}", bank.fresh(rng), ["tonight", "report", "live"][rng.gen_range(0..3)]);
                    Program {
                        title,
                        category,
                        time: NaiveTime::from_hms_opt(h, m, 0).unwrap(),
                        hosts: (0..2).map(|_| format!("{} {}", bank.fresh(rng), bank.fresh(rng))).collect(),
                    }
                })
                .collect();
            Station {
                id: StationId::new_unchecked(code),
                lean: lean(code),
                favored,
                programs,
            }
        })
        .collect()
}

/// Zipf-like weights so a few words of each list dominate.
fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|i| 1.0 / (i as f64 + 1.0).powf(0.7))).expect("non-empty list")
}

struct Lists {
    core: Vec<Vec<String>>,
    left: Vec<Vec<String>>,
    right: Vec<Vec<String>>,
    chatter: Vec<Vec<String>>,
    filler: Vec<String>,
    dialect_left: Vec<String>,
    dialect_right: Vec<String>,
    ads: Vec<String>,
    core_dist: WeightedIndex<f64>,
    chatter_dist: WeightedIndex<f64>,
    filler_dist: WeightedIndex<f64>,
}

struct StoryPlan<'a> {
    topic: Option<usize>,
    chatter: usize,
    /// Probability of picking the right-leaning variant of a framed slot.
    p_right: f64,
    framed: bool,
    lists: &'a Lists,
}

impl StoryPlan<'_> {
    fn word(&self, rng: &mut ChaCha8Rng) -> String {
        let l = self.lists;
        let r: f64 = rng.gen();
        let right = rng.gen::<f64>() < self.p_right;
        if r < 0.28 {
            STOPWORDS[rng.gen_range(0..STOPWORDS.len())].to_string()
        } else if r < 0.60 {
            match self.topic {
                Some(z) => l.core[z][l.core_dist.sample(rng)].clone(),
                None => l.chatter[self.chatter][l.chatter_dist.sample(rng)].clone(),
            }
        } else if r < 0.66 && self.topic.is_some() {
            let z = self.topic.unwrap();
            let side = if right { &l.right[z] } else { &l.left[z] };
            side[rng.gen_range(0..side.len())].clone()
        } else if r < 0.92 || !self.framed {
            l.filler[l.filler_dist.sample(rng)].clone()
        } else {
            let side = if right { &l.dialect_right } else { &l.dialect_left };
            side[rng.gen_range(0..side.len())].clone()
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
        (0..len).map(|_| self.word(rng)).collect()
    }
}

/// Sentence lengths summing to `total`, the first at least `first_min`.
fn sentence_lengths(rng: &mut ChaCha8Rng, total: usize, first_min: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut left = total;
    let first = rng.gen_range(8..=18).max(first_min).min(total);
    out.push(first);
    left -= first;
    while left > 0 {
        let len = rng.gen_range(8..=18);
        if left <= len + 4 {
            out.push(left);
            break;
        }
        out.push(len);
        left -= len;
    }
    out
}

pub fn generate(config: &FixtureConfig) -> Result<Fixture> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut bank = WordBank::new(TOPIC_IDS.iter().chain(STOPWORDS.iter()).copied());
    let n_topics = config.topics;
    let topic_ids: Vec<&str> = TOPIC_IDS[..n_topics].to_vec();

    let lists = Lists {
        core: (0..n_topics).map(|_| bank.many(&mut rng, config.core_words)).collect(),
        left: (0..n_topics).map(|_| bank.many(&mut rng, config.frame_words)).collect(),
        right: (0..n_topics).map(|_| bank.many(&mut rng, config.frame_words)).collect(),
        chatter: (0..6).map(|_| bank.many(&mut rng, 30)).collect(),
        filler: bank.many(&mut rng, 400),
        dialect_left: bank.many(&mut rng, 20),
        dialect_right: bank.many(&mut rng, 20),
        ads: bank.many(&mut rng, 40),
        core_dist: zipf(config.core_words),
        chatter_dist: zipf(30),
        filler_dist: zipf(400),
    };
    let stations = stations(&mut bank, &mut rng, n_topics);

    let span_days = (config.end - config.start).num_days().max(1);
    let episodes_per_station = config.segments_per_station.div_ceil(config.stories_per_episode);
    let mut episodes = Vec::new();
    let mut truth = FixtureTruth::default();

    for station in &stations {
        let mut srng = ChaCha8Rng::seed_from_u64(config.seed ^ fxhash(station.id.as_str()));
        for e in 0..episodes_per_station {
            let day = (e as i64 * span_days) / episodes_per_station as i64;
            let date = config.start + Duration::days(day);
            let t = day as f64 / span_days as f64;
            let program = &station.programs[e % station.programs.len()];
            let opinion = if program.category == ProgramCategory::PartisanOpinion { 1.3 } else { 1.0 };
            let strength = (station.lean * opinion * (0.3 + 0.6 * t)).clamp(-0.95, 0.95);
            let p_right = 0.5 + 0.5 * strength;

            let weights: Vec<f64> = (0..n_topics)
                .map(|z| if station.favored.contains(&z) { 1.0 + 2.5 * t } else { 1.0 })
                .collect();
            let topic_dist = WeightedIndex::new(&weights).expect("positive weights");

            let mut text = String::new();
            let mut ad_spans = Vec::new();
            let mut spans = Vec::new();
            let mut prev_len = 150usize;
            for s in 0..config.stories_per_episode {
                let topic = (srng.gen::<f64>() < config.topical_rate).then(|| topic_dist.sample(&mut srng));
                let plan = StoryPlan {
                    topic,
                    chatter: srng.gen_range(0..lists.chatter.len()),
                    p_right,
                    framed: station.lean != 0.0 || srng.gen_bool(0.5),
                    lists: &lists,
                };
                let len = srng.gen_range(90..=if s == 0 { 135 } else { 150 });
                let first_min = 151 - prev_len.min(150);
                let lengths = sentence_lengths(&mut srng, len, if s == 0 { 0 } else { first_min });
                let mut sentences: Vec<Vec<String>> = lengths.iter().map(|&n| plan.sentence(&mut srng, n)).collect();
                if s == 0 {
                    let host = &program.hosts[srng.gen_range(0..program.hosts.len())];
                    let intro = format!("good evening i am {host} and this is {}", program.title);
                    let intro: Vec<String> = intro.split(' ').map(str::to_string).collect();
                    let first = &mut sentences[0];
                    let keep = first.len().saturating_sub(intro.len());
                    first.truncate(keep);
                    first.splice(0..0, intro);
                }
                if let Some(z) = topic {
                    if srng.gen::<f64>() < config.label_rate {
                        let si = srng.gen_range(0..sentences.len());
                        let wi = srng.gen_range(0..sentences[si].len());
                        sentences[si][wi] = topic_ids[z].to_string();
                    }
                }
                if srng.gen::<f64>() < config.leak_rate {
                    let other = loop {
                        let w = srng.gen_range(0..n_topics);
                        if Some(w) != topic {
                            break w;
                        }
                    };
                    let run = srng.gen_range(2..=3);
                    let si = srng.gen_range(0..sentences.len());
                    let len_si = sentences[si].len();
                    let at = srng.gen_range(0..=len_si.saturating_sub(run));
                    for (j, w) in lists.core[other].choose_multiple(&mut srng, run).enumerate() {
                        if at + j < len_si {
                            sentences[si][at + j] = w.clone();
                        }
                    }
                }
                let n_words: usize = sentences.iter().map(Vec::len).sum();
                for sentence in &sentences {
                    if !text.is_empty() {
                        text.push(' ');
                    }
                    text.push_str(&sentence.join(" "));
                    text.push('.');
                }
                spans.push(StorySpan {
                    topic: topic.map(|z| topic_ids[z].to_string()),
                    words: n_words as u32,
                });
                prev_len = n_words;
                if s + 1 < config.stories_per_episode && srng.gen::<f64>() < config.ad_rate {
                    let n = srng.gen_range(8..=15);
                    let ad: Vec<&str> = (0..n).map(|_| lists.ads[srng.gen_range(0..lists.ads.len())].as_str()).collect();
                    text.push(' ');
                    let start = text.len();
                    text.push_str(&ad.join(" "));
                    text.push('!');
                    ad_spans.push([start, text.len()]);
                }
            }
            let id = format!("{}-{}-{:05}", station.id, date.format("%Y%m%d"), e);
            truth.stories.insert(id.clone(), spans);
            episodes.push(Episode {
                id,
                station: station.id.clone(),
                program_title: program.title.clone(),
                category: program.category,
                air_date: date,
                air_time: program.time,
                duration_min: if program.category == ProgramCategory::HardNews { 30 } else { 60 },
                text,
                ad_spans,
            });
        }
    }

    let topics = topic_ids
        .iter()
        .map(|&t| TopicLabel {
            id: t.to_string(),
            label_words: vec![t.to_string()],
        })
        .collect();
    let topic_words = topic_ids
        .iter()
        .enumerate()
        .map(|(z, &t)| {
            let mut words: BTreeSet<String> = lists.core[z].iter().cloned().collect();
            words.extend(lists.left[z].iter().cloned());
            words.extend(lists.right[z].iter().cloned());
            words.insert(t.to_string());
            (t.to_string(), words)
        })
        .collect();
    let confounders = stations
        .iter()
        .map(|s| {
            let mut names: Vec<String> = s.programs.iter().map(|p| p.title.to_lowercase()).collect();
            names.extend(s.programs.iter().flat_map(|p| p.hosts.iter().cloned()));
            (s.id.to_string(), names)
        })
        .collect();
    let panel = generate_panel(config, &mut ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1)))?;

    Ok(Fixture {
        config: config.clone(),
        episodes,
        topics,
        stopwords: STOPWORDS.iter().map(|s| s.to_string()).collect(),
        confounders,
        topic_words,
        truth,
        panel,
    })
}

/// Small stable string hash for deriving per-item seeds.
pub(crate) fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotatorConfig {
    pub seed: u64,
    pub annotators: usize,
    pub accuracy: f64,
    pub min_annotators: usize,
    pub cap: usize,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            seed: 7,
            annotators: 7,
            accuracy: 0.85,
            min_annotators: crate::annotation::DEFAULT_MIN_ANNOTATORS,
            cap: crate::annotation::DEFAULT_ANNOTATOR_CAP,
        }
    }
}

/// Crowd simulation: each annotator gives the planted topic when it is
/// among the candidates (otherwise "none") with probability `accuracy`,
/// and a uniformly random other option otherwise. Annotators are asked in
/// turn until the task resolves or hits the cap.
pub fn simulate_annotations(
    tasks: &[AnnotationTask],
    segment_truth: &HashMap<String, Option<String>>,
    config: &AnnotatorConfig,
) -> Result<Vec<AnnotationRecord>> {
    if config.annotators < config.cap || config.min_annotators == 0 || config.cap < config.min_annotators {
        return Err(Error::Config("annotator pool must cover the cap, and cap >= min_annotators > 0".into()));
    }
    let base = Utc.with_ymd_and_hms(2024, 1, 1, 9, 0, 0).unwrap();
    let mut records = Vec::new();
    for task in tasks {
        let truth = segment_truth
            .get(&task.segment_id)
            .ok_or_else(|| Error::Validation(format!("no planted truth for segment `{}`", task.segment_id)))?;
        let honest = match truth {
            Some(t) if task.candidates.contains(t) => Choice::Topic(t.clone()),
            _ => Choice::None,
        };
        let options: Vec<Choice> = task
            .candidates
            .iter()
            .map(|c| Choice::Topic(c.clone()))
            .chain(std::iter::once(Choice::None))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ fxhash(&task.task_id));
        let mut given: Vec<Choice> = Vec::new();
        for a in 0..config.cap {
            let choice = if rng.gen::<f64>() < config.accuracy {
                honest.clone()
            } else {
                let wrong: Vec<&Choice> = options.iter().filter(|c| **c != honest).collect();
                wrong[rng.gen_range(0..wrong.len())].clone()
            };
            records.push(AnnotationRecord {
                schema_version: SCHEMA_VERSION,
                task_id: task.task_id.clone(),
                annotator_id: format!("sim{:02}", a + 1),
                choice: choice.clone(),
                timestamp: base + Duration::seconds(records.len() as i64),
            });
            given.push(choice);
            let refs: Vec<&Choice> = given.iter().collect();
            if resolve(&refs, config.min_annotators, config.cap).1 != LabelStatus::NeedsMore {
                break;
            }
        }
    }
    Ok(records)
}

pub(crate) fn month_of(date: NaiveDate) -> Month {
    use chrono::Datelike;
    Month { year: date.year(), month: date.month() }
}

#[cfg(test)]
mod tests;

/// Precision and recall of one topic's segment set against the planted
/// truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetQuality {
    pub topic: String,
    pub size: usize,
    pub true_positives: usize,
    pub relevant: usize,
    pub precision: f64,
    pub recall: f64,
}

pub fn set_quality(truth: &[Option<String>], sets: &BTreeMap<String, Vec<usize>>) -> Vec<SetQuality> {
    sets.iter()
        .map(|(topic, members)| {
            let relevant = truth.iter().filter(|t| t.as_deref() == Some(topic.as_str())).count();
            let tp = members.iter().filter(|&&i| truth[i].as_deref() == Some(topic.as_str())).count();
            let ratio = |a: usize, b: usize| if b > 0 { a as f64 / b as f64 } else { 0.0 };
            SetQuality {
                topic: topic.clone(),
                size: members.len(),
                true_positives: tp,
                relevant,
                precision: ratio(tp, members.len()),
                recall: ratio(tp, relevant),
            }
        })
        .collect()
}
