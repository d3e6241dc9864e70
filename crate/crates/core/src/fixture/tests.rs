use std::collections::HashSet;

use super::*;
use crate::corpus::{build_corpus, parse_episodes, StationRegistry};
use crate::Exec;

fn small() -> Fixture {
    generate(&FixtureConfig::small(3)).unwrap()
}

#[test]
fn episodes_survive_the_ingest_path() {
    let f = small();
    let jsonl: Vec<String> = f.episodes.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
    let (parsed, report) = parse_episodes(&jsonl.join("\n"), &StationRegistry::default());
    assert!(report.is_clean(), "{:?}", report.rejected.first());
    assert_eq!(parsed, f.episodes);
}

#[test]
fn stories_align_with_segments() {
    let f = small();
    let corpus = build_corpus(&f.episodes, 150, [], [], "h", Exec::Sequential);
    let stories: usize = f.truth.stories.values().map(Vec::len).sum();
    assert_eq!(corpus.len(), stories);
    let words: u64 = f.truth.stories.values().flatten().map(|s| u64::from(s.words)).sum();
    assert_eq!(corpus.segments.iter().map(|s| u64::from(s.word_count)).sum::<u64>(), words);
    let topics = f.truth.segment_topics(&corpus).unwrap();
    let flat: Vec<Option<String>> = f.truth.stories.values().flatten().map(|s| s.topic.clone()).collect();
    assert_eq!(topics, flat);
    // Ads never reach the corpus.
    let ad_free: HashSet<&str> = corpus.segments.iter().flat_map(|s| s.text.split(' ')).collect();
    assert!(!ad_free.iter().any(|w| w.ends_with('!')));
}

#[test]
fn generation_is_seeded() {
    let a = small();
    let b = small();
    assert_eq!(a.episodes, b.episodes);
    assert_eq!(a.panel, b.panel);
    let c = generate(&FixtureConfig::small(4)).unwrap();
    assert_ne!(a.episodes, c.episodes);
}

#[test]
fn panel_records_are_valid() {
    let f = small();
    let reg = StationRegistry::default();
    assert_eq!(f.panel.len(), 40 * 12);
    for r in &f.panel {
        r.validate(&reg).unwrap();
    }
}

#[test]
fn confounders_and_label_words_are_planted() {
    let f = small();
    let text: String = f.episodes.iter().map(|e| e.text.as_str()).collect::<Vec<_>>().join(" ");
    for names in f.confounders.values() {
        assert!(names.iter().any(|n| text.contains(n.as_str())));
    }
    for t in &f.topics {
        assert!(text.contains(&t.label_words[0]), "{}", t.id);
        assert!(f.topic_words[&t.id].contains(&t.id));
    }
    assert_eq!(f.review_decisions().len(), f.topics.len());
}

#[test]
fn simulated_annotators_follow_truth() {
    let tasks: Vec<AnnotationTask> = (0..200)
        .map(|i| AnnotationTask {
            schema_version: SCHEMA_VERSION,
            task_id: format!("t{i}"),
            segment_id: format!("s{i}"),
            station: StationId::new_unchecked("CNN"),
            topic: "a".into(),
            text: String::new(),
            candidates: vec!["a".into(), "b".into(), "c".into()],
        })
        .collect();
    let truth: HashMap<String, Option<String>> = (0..200)
        .map(|i| (format!("s{i}"), [Some("a".to_string()), Some("z".to_string()), None][i % 3].clone()))
        .collect();
    let cfg = AnnotatorConfig::default();
    let records = simulate_annotations(&tasks, &truth, &cfg).unwrap();
    assert_eq!(records, simulate_annotations(&tasks, &truth, &cfg).unwrap());
    let labels = crate::annotation::aggregate(&tasks, &records, cfg.min_annotators, cfg.cap).unwrap();
    let mut correct = 0;
    for (i, l) in labels.iter().enumerate() {
        let expected = if i % 3 == 0 { Choice::Topic("a".into()) } else { Choice::None };
        if l.label.as_ref() == Some(&expected) {
            correct += 1;
        }
        assert!(l.n_records >= cfg.min_annotators && l.n_records <= cfg.cap);
    }
    assert!(correct >= 190, "{correct}");
}
