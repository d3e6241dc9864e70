//! Sequential against rayon on the two hot paths: corpus construction
//! and the leave-out estimator.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tvpolar::corpus::{build_corpus, DEFAULT_MAX_WORDS};
use tvpolar::fixture::{generate, FixtureConfig};
use tvpolar::polarize::{leave_out_estimate, EstimatorOptions, GroupCorpus};
use tvpolar::Exec;

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn benches(c: &mut Criterion) {
    let fx = generate(&FixtureConfig {
        segments_per_station: 800,
        ..FixtureConfig::small(7)
    })
    .unwrap();
    let stop = fx.stopwords.iter().map(String::as_str);

    let mut g = c.benchmark_group("build_corpus");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_corpus(black_box(&fx.episodes), DEFAULT_MAX_WORDS, stop.clone(), [], "bench", exec))
        });
    }
    g.finish();

    let corpus = build_corpus(&fx.episodes, DEFAULT_MAX_WORDS, stop, [], "bench", Exec::Sequential);
    let side = |station: &str| {
        let members = corpus
            .segments
            .iter()
            .zip(&corpus.phrases)
            .filter(|(s, _)| s.station.as_str() == station)
            .map(|(s, v)| (s.id(), v.clone()))
            .collect();
        GroupCorpus::new(station, members).unwrap()
    };
    let (fnc, msnbc) = (side("FNC"), side("MSNBC"));

    let mut g = c.benchmark_group("leave_out_estimate");
    for (name, exec) in STRATEGIES {
        let opts = EstimatorOptions { exec, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| leave_out_estimate(black_box(&fnc), black_box(&msnbc), &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
