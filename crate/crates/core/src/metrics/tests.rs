use chrono::NaiveTime;
use proptest::prelude::*;

use super::*;
use crate::corpus::{build_corpus, Episode, ProgramCategory, StationRegistry};
use crate::Exec;

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, d).unwrap()
}

fn st(s: &str) -> StationId {
    StationId::new_unchecked(s)
}

/// One episode per (station, day, text); texts without punctuation stay
/// a single segment when short.
fn corpus(items: &[(&str, u32, usize)]) -> Corpus {
    let eps: Vec<Episode> = items
        .iter()
        .enumerate()
        .map(|(i, &(s, d, words))| Episode {
            id: format!("e{i:03}"),
            station: st(s),
            program_title: "p".into(),
            category: ProgramCategory::HardNews,
            air_date: day(d),
            air_time: NaiveTime::from_hms_opt(18, 0, 0).unwrap(),
            duration_min: 30,
            text: vec!["w"; words].join(" "),
            ad_spans: vec![],
        })
        .collect();
    build_corpus(&eps, 150, [], [], "h", Exec::Sequential)
}

fn sets(pairs: &[(&str, &[usize])]) -> BTreeMap<String, Vec<usize>> {
    pairs.iter().map(|(t, m)| (t.to_string(), m.to_vec())).collect()
}

#[test]
fn topic_share_hand_examples() {
    let c = corpus(&[("CNN", 1, 100), ("CNN", 1, 100), ("CNN", 1, 100), ("FNC", 2, 50)]);
    let t = ShareTable::build(&c, &sets(&[("a", &[0]), ("b", &[0, 1, 2]), ("c", &[])]));
    assert_eq!(t.share(&st("CNN"), "a", day(1)), Some(1.0 / 3.0));
    assert_eq!(t.share(&st("CNN"), "b", day(1)), Some(1.0));
    assert_eq!(t.share(&st("CNN"), "c", day(1)), Some(0.0));
    // No coverage is not zero.
    assert_eq!(t.share(&st("CNN"), "a", day(2)), None);
    assert_eq!(t.share(&st("FNC"), "a", day(2)), Some(0.0));
    let s = t.series(&st("CNN"), "a").unwrap();
    assert_eq!(s.points, vec![SharePoint { date: day(1), y: 1.0 / 3.0 }]);
}

#[test]
fn divergence_hand_examples() {
    assert_eq!(divergence(&[0.2, 0.1], &[0.1, 0.3]).unwrap(), 0.15);
    assert_eq!(divergence(&[0.3, 0.7, 0.0], &[0.3, 0.7, 0.0]).unwrap(), 0.0);
    assert_eq!(divergence(&[1.0; 24], &[0.0; 24]).unwrap(), 1.0);
    assert!(divergence(&[0.1], &[0.1, 0.2]).is_err());
    assert!(divergence(&[], &[]).is_err());
    assert!(divergence(&[1.5], &[0.2]).is_err());
}

#[test]
fn window_aggregation_modes() {
    // Day 1: 100 words, all topic a. Day 2: 300 words, none.
    let c = corpus(&[("CNN", 1, 100), ("CNN", 2, 100), ("CNN", 2, 100), ("CNN", 2, 100)]);
    let t = ShareTable::build(&c, &sets(&[("a", &[0])]));
    let (s, e) = (day(1), day(3));
    assert_eq!(t.window_shares(&st("CNN"), s, e, ShareAggregation::DailyMean), Some(vec![0.5]));
    assert_eq!(t.window_shares(&st("CNN"), s, e, ShareAggregation::WordWeighted), Some(vec![0.25]));
    assert_eq!(t.window_shares(&st("FNC"), s, e, ShareAggregation::DailyMean), None);
}

#[test]
fn divergence_series_skips_one_sided_windows() {
    let c = corpus(&[("CNN", 1, 100), ("FNC", 1, 100), ("CNN", 2, 100)]);
    let t = ShareTable::build(&c, &sets(&[("a", &[0]), ("b", &[1])]));
    let s = divergence_series(&t, &st("CNN"), &st("FNC"), &Window::Daily, ShareAggregation::DailyMean).unwrap();
    assert_eq!(s.k, 2);
    assert_eq!(s.points.len(), 2);
    assert_eq!(s.points[0].delta, Some(1.0));
    assert_eq!(s.points[1].delta, None);
    let r = divergence_series(&t, &st("FNC"), &st("CNN"), &Window::Daily, ShareAggregation::DailyMean).unwrap();
    assert_eq!(s.points, r.points);
}

#[test]
fn smoothing_examples() {
    let step: Vec<(NaiveDate, f64)> = (1..=6).map(|d| (day(d), if d > 3 { 1.0 } else { 0.0 })).collect();
    assert_eq!(smooth(&step, 1).unwrap().0, step);
    let (out, meta) = smooth(&step, 3).unwrap();
    let ys: Vec<f64> = out.iter().map(|p| p.1).collect();
    assert_eq!(ys, vec![0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0]);
    assert_eq!(meta.window_days, 3);
    let flat: Vec<(NaiveDate, f64)> = (1..=9).map(|d| (day(d), 0.25)).collect();
    assert_eq!(smooth(&flat, 5).unwrap().0, flat);
    // Gaps: only available values are averaged.
    let gappy = vec![(day(1), 1.0), (day(2), 3.0), (day(5), 10.0)];
    let ys: Vec<f64> = smooth(&gappy, 3).unwrap().0.iter().map(|p| p.1).collect();
    assert_eq!(ys, vec![2.0, 2.0, 10.0]);
    assert!(smooth(&gappy, 0).is_err());
}

fn rec(id: &str, minutes: &[(&str, u32)], news: u32, weight: f64) -> PanelRecord {
    PanelRecord {
        panelist_id: id.into(),
        month: Month::new(2020, 3).unwrap(),
        minutes: minutes.iter().map(|&(s, m)| (st(s), m)).collect(),
        total_news_minutes: news,
        total_tv_minutes: news + 100,
        weight,
    }
}

fn march() -> Month {
    Month::new(2020, 3).unwrap()
}

#[test]
fn active_consumer_examples() {
    let p = vec![rec("a", &[], 45, 100.0), rec("b", &[], 10, 200.0), rec("c", &[], 60, 300.0)];
    let a = active_consumers(&p, march(), 30).unwrap();
    assert_eq!((a.numerator, a.denominator), (400.0, 600.0));
    assert_eq!(a.share, 400.0 / 600.0);
    let zero = vec![rec("a", &[], 0, 1.0), rec("b", &[], 0, 2.0)];
    assert_eq!(active_consumers(&zero, march(), 30).unwrap().share, 0.0);
    let edge = vec![rec("a", &[], 30, 1.0), rec("b", &[], 29, 1.0)];
    assert_eq!(active_consumers(&edge, march(), 30).unwrap().share, 0.5);
    assert!(active_consumers(&edge, Month::new(2020, 4).unwrap(), 30).is_err());
}

#[test]
fn majority_examples() {
    let p = vec![rec("a", &[("FNC", 30), ("CNN", 25)], 55, 1.0)];
    assert_eq!(majority_share(&p, march(), &[st("FNC")], 0.5, 30).unwrap().share, 1.0);
    assert_eq!(majority_share(&p, march(), &[st("FNC")], 0.75, 30).unwrap().share, 0.0);
    let solo = vec![rec("a", &[("NBC", 40)], 40, 1.0)];
    for th in [0.5, 0.75, 1.0] {
        assert_eq!(majority_share(&solo, march(), &[st("NBC")], th, 30).unwrap().share, 1.0);
    }
    let pooled = vec![rec("a", &[("ABC", 20), ("CBS", 20), ("NBC", 20)], 70, 1.0)];
    let bc = StationRegistry::broadcast_pool();
    assert_eq!(majority_share(&pooled, march(), &bc, 0.75, 30).unwrap().share, 1.0);
    for s in &bc {
        assert_eq!(majority_share(&pooled, march(), std::slice::from_ref(s), 0.5, 30).unwrap().share, 0.0);
    }
    // Inactive panelists never count, whatever their mix.
    let idle = vec![rec("a", &[("FNC", 20)], 20, 1.0)];
    assert_eq!(majority_share(&idle, march(), &[st("FNC")], 0.5, 30).unwrap().share, 0.0);
    assert!(majority_share(&p, march(), &[st("FNC")], 0.0, 30).is_err());
    assert!(majority_share(&p, march(), &[st("FNC")], 1.01, 30).is_err());
}

#[test]
fn panel_parsing_and_validation() {
    let reg = StationRegistry::default();
    let ok = serde_json::to_string(&rec("a", &[("FNC", 30)], 55, 2.0)).unwrap();
    assert!(ok.contains("\"month\":\"2020-03\""));
    let lines = [
        ok.clone(),
        ok.clone(),
        serde_json::to_string(&rec("b", &[("FNC", 60)], 55, 2.0)).unwrap(),
        serde_json::to_string(&rec("c", &[("XYZ", 1)], 55, 2.0)).unwrap(),
        serde_json::to_string(&rec("d", &[], 55, 0.0)).unwrap(),
        serde_json::to_string(&PanelRecord { total_tv_minutes: 10, ..rec("e", &[], 55, 1.0) }).unwrap(),
        ok.replace("2020-03", "2020-13"),
        r#"{"panelist_id":"f"}"#.to_string(),
    ];
    let (records, report) = parse_panel(&lines.join("\n"), &reg);
    assert_eq!(records.len(), 1);
    assert_eq!(report.accepted, 1);
    assert_eq!(report.rejected.iter().map(|r| r.line).collect::<Vec<_>>(), vec![2, 3, 4, 5, 6, 7, 8]);
    assert_eq!("2019-07".parse::<Month>().unwrap(), Month::new(2019, 7).unwrap());
    assert!("2019-7".parse::<Month>().is_err());
}

fn fuzz_panel() -> impl Strategy<Value = Vec<PanelRecord>> {
    let codes = ["ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC"];
    prop::collection::vec((prop::collection::vec(0u32..60, 6), 0u32..120, 1u32..1000), 1..30).prop_map(move |rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (mins, extra, w))| {
                let tracked: u32 = mins.iter().sum();
                PanelRecord {
                    panelist_id: format!("p{i}"),
                    month: march(),
                    minutes: codes.iter().zip(&mins).map(|(c, &m)| (st(c), m)).collect(),
                    total_news_minutes: tracked + extra,
                    total_tv_minutes: tracked + extra + 50,
                    weight: f64::from(w) / 7.0,
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn divergence_is_symmetric_and_bounded(pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..30)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let d = divergence(&a, &b).unwrap();
        prop_assert_eq!(d, divergence(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(divergence(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn consumption_monotone_and_pool_dominant(panel in fuzz_panel(), seed in any::<u64>()) {
        let pools = [
            StationRegistry::broadcast_pool(),
            StationRegistry::cable_pool(),
            StationRegistry::big_six_pool(),
        ];
        for pool in &pools {
            for th in [0.5, 0.75] {
                let p = majority_share(&panel, march(), pool, th, 30).unwrap();
                prop_assert!((0.0..=1.0).contains(&p.share));
                for s in pool {
                    let m = majority_share(&panel, march(), std::slice::from_ref(s), th, 30).unwrap();
                    prop_assert!(p.share >= m.share);
                }
            }
            let hi = majority_share(&panel, march(), pool, 0.75, 30).unwrap();
            let lo = majority_share(&panel, march(), pool, 0.5, 30).unwrap();
            prop_assert!(hi.share <= lo.share);
        }
        let mut shuffled = panel.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed));
        prop_assert_eq!(active_consumers(&panel, march(), 30).unwrap(), active_consumers(&shuffled, march(), 30).unwrap());
        let cable = StationRegistry::cable_pool();
        prop_assert_eq!(
            majority_share(&panel, march(), &cable, 0.5, 30).unwrap(),
            majority_share(&shuffled, march(), &cable, 0.5, 30).unwrap()
        );
    }
}
