use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn vec_of(counts: &[(u32, u32)]) -> PhraseVector {
    PhraseVector::from_counts(counts.iter().map(|&(t, c)| (PhraseKey::unigram(t), c)))
}

fn group(label: &str, vectors: Vec<PhraseVector>) -> GroupCorpus {
    let members = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| (format!("{label}{i:04}"), v))
        .collect();
    GroupCorpus::new(label, members).unwrap()
}

fn opts() -> EstimatorOptions {
    EstimatorOptions::default()
}

/// From-scratch recomputation: every segment rebuilds both groups' totals
/// without itself.
fn brute_force(
    source: &[PhraseVector],
    target: &[PhraseVector],
    norm: RhoNormalization,
    leave_out: bool,
) -> f64 {
    fn side_mean(own: &[PhraseVector], other: &[PhraseVector], norm: RhoNormalization, leave_out: bool) -> f64 {
        let mut other_tot: BTreeMap<u64, u64> = BTreeMap::new();
        let mut other_m = 0u64;
        for v in other {
            for &(k, c) in v.entries() {
                *other_tot.entry(k.raw()).or_default() += c as u64;
                other_m += c as u64;
            }
        }
        let mut sum = 0.0;
        for (i, v) in own.iter().enumerate() {
            let mut own_tot: BTreeMap<u64, u64> = BTreeMap::new();
            let mut own_m = 0u64;
            for (j, w) in own.iter().enumerate() {
                if leave_out && i == j {
                    continue;
                }
                for &(k, c) in w.entries() {
                    *own_tot.entry(k.raw()).or_default() += c as u64;
                    own_m += c as u64;
                }
            }
            let m: u64 = v.entries().iter().map(|e| e.1 as u64).sum();
            let mut dot = 0.0;
            for &(k, c) in v.entries() {
                let a = own_tot.get(&k.raw()).copied().unwrap_or(0);
                let b = other_tot.get(&k.raw()).copied().unwrap_or(0);
                let r = match norm {
                    RhoNormalization::Counts if a + b == 0 => 0.5,
                    RhoNormalization::Counts => a as f64 / (a + b) as f64,
                    RhoNormalization::Frequencies => {
                        let qa = if own_m == 0 { 0.0 } else { a as f64 / own_m as f64 };
                        let qb = b as f64 / other_m as f64;
                        if qa + qb == 0.0 { 0.5 } else { qa / (qa + qb) }
                    }
                };
                dot += c as f64 * r;
            }
            sum += dot / m as f64;
        }
        sum / own.len() as f64
    }
    0.5 * side_mean(source, target, norm, leave_out) + 0.5 * side_mean(target, source, norm, leave_out)
}

fn random_group(rng: &mut ChaCha8Rng, n: usize, vocab: u32) -> Vec<PhraseVector> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..30);
            vec_of(&(0..len).map(|_| (rng.gen_range(0..vocab), rng.gen_range(1..4))).collect::<Vec<_>>())
        })
        .collect()
}

#[test]
fn identical_segments_closed_form() {
    for n in [2usize, 3, 5, 10] {
        let seg = vec_of(&[(1, 2), (2, 1), (3, 4)]);
        let s = group("s", vec![seg.clone(); n]);
        let t = group("t", vec![seg; n]);
        let est = leave_out_estimate(&s, &t, &opts()).unwrap();
        let expected = (n as f64 - 1.0) / (2.0 * n as f64 - 1.0);
        assert!((est.value - expected).abs() < 1e-12, "n={n}: {} vs {expected}", est.value);
        let plug = plug_in_estimate(&s, &t, &opts()).unwrap();
        assert_eq!(plug.value, 0.5);
    }
}

#[test]
fn disjoint_vocabularies_are_fully_separable() {
    let s = group("s", vec![vec_of(&[(1, 1), (2, 1)]), vec_of(&[(1, 2), (2, 3)])]);
    let t = group("t", vec![vec_of(&[(7, 1)]), vec_of(&[(7, 5)]), vec_of(&[(7, 1)])]);
    for norm in [RhoNormalization::Counts, RhoNormalization::Frequencies] {
        let o = EstimatorOptions { normalization: norm, ..opts() };
        assert_eq!(leave_out_estimate(&s, &t, &o).unwrap().value, 1.0);
        assert_eq!(plug_in_estimate(&s, &t, &o).unwrap().value, 1.0);
    }
}

#[test]
fn rho_values() {
    let s = group("s", vec![vec_of(&[(1, 1), (2, 1), (3, 8)])]);
    let t = group("t", vec![vec_of(&[(2, 1), (1, 3), (4, 6)])]);
    for norm in [RhoNormalization::Counts, RhoNormalization::Frequencies] {
        let r = rho(&s, &t, norm);
        assert_eq!(r.get(PhraseKey::unigram(3)), Some(1.0));
        assert_eq!(r.get(PhraseKey::unigram(2)), Some(0.5));
        assert!((r.get(PhraseKey::unigram(1)).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(r.get(PhraseKey::unigram(9)), None);
        assert_eq!(r.len(), 4);
    }
}

#[test]
fn frequency_normalization_corrects_group_size() {
    // same frequencies, target has twice the mass
    let s = group("s", vec![vec_of(&[(1, 1), (2, 1)])]);
    let t = group("t", vec![vec_of(&[(1, 2), (2, 2)])]);
    assert_eq!(rho(&s, &t, RhoNormalization::Frequencies).get(PhraseKey::unigram(1)), Some(0.5));
    assert!((rho(&s, &t, RhoNormalization::Counts).get(PhraseKey::unigram(1)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..40 {
        let (ns, nt) = (rng.gen_range(2..25), rng.gen_range(2..25));
        let src = random_group(&mut rng, ns, 40);
        let tgt = random_group(&mut rng, nt, 40);
        let (s, t) = (group("s", src.clone()), group("t", tgt.clone()));
        for norm in [RhoNormalization::Counts, RhoNormalization::Frequencies] {
            let o = EstimatorOptions { normalization: norm, exec: Exec::Sequential, ..opts() };
            let lo = leave_out_estimate(&s, &t, &o).unwrap().value;
            let pi = plug_in_estimate(&s, &t, &o).unwrap().value;
            assert!((lo - brute_force(&src, &tgt, norm, true)).abs() < 1e-12, "trial {trial}");
            assert!((pi - brute_force(&src, &tgt, norm, false)).abs() < 1e-12, "trial {trial}");
            assert!((0.0..=1.0).contains(&lo));
        }
    }
}

#[test]
fn swap_symmetry_and_exec_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let s = group("s", random_group(&mut rng, 12, 30));
        let t = group("t", random_group(&mut rng, 7, 30));
        let a = leave_out_estimate(&s, &t, &opts()).unwrap();
        let b = leave_out_estimate(&t, &s, &opts()).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        let seq = EstimatorOptions { exec: Exec::Sequential, ..opts() };
        assert_eq!(a.value.to_bits(), leave_out_estimate(&s, &t, &seq).unwrap().value.to_bits());
    }
}

#[test]
fn partisan_score_extremes() {
    let s = group("s", vec![vec_of(&[(1, 2)]), vec_of(&[(1, 1), (2, 1)]), vec_of(&[(2, 4)])]);
    let t = group("t", vec![vec_of(&[(9, 2)]), vec_of(&[(9, 1)])]);
    let scores = partisan_scores(&s, &t, &opts()).unwrap();
    assert_eq!(scores.len(), 5);
    for sc in &scores {
        match sc.side {
            Side::Source => assert_eq!(sc.score, Some(1.0)),
            Side::Target => {
                assert_eq!(sc.score, Some(0.0));
                assert_eq!(sc.own_score, Some(1.0));
            }
        }
    }
    // balanced phrase everywhere: shares are exactly one half
    let bal = vec_of(&[(3, 1)]);
    let s = group("s", vec![bal.clone(), bal.clone(), bal.clone()]);
    let t = group("t", vec![bal.clone(), bal.clone(), bal.clone()]);
    let plug = score_groups(&s, &t, false, &opts());
    assert!(plug.iter().all(|p| p.score == Some(0.5)));
}

#[test]
fn zero_denominator_policies() {
    // phrase 5 appears only in the first source segment
    let s = group("s", vec![vec_of(&[(5, 1), (1, 1)]), vec_of(&[(1, 1)])]);
    let t = group("t", vec![vec_of(&[(1, 1)]), vec_of(&[(1, 1)])]);
    let neutral = partisan_scores(&s, &t, &opts()).unwrap();
    // rho_{-i}(1) = 1/3, rho_{-i}(5) = 0.5
    assert!((neutral[0].score.unwrap() - (0.5 * 1.0 / 3.0 + 0.5 * 0.5)).abs() < 1e-15);
    let drop = EstimatorOptions { zero_policy: ZeroDenominator::Drop, ..opts() };
    let dropped = partisan_scores(&s, &t, &drop).unwrap();
    assert!((dropped[0].score.unwrap() - 1.0 / 3.0).abs() < 1e-15);

    let lonely = group("s", vec![vec_of(&[(5, 1)]), vec_of(&[(6, 1)])]);
    let err = leave_out_estimate(&lonely, &t, &drop).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)));
}

#[test]
fn undersized_and_empty_groups_rejected() {
    let one = group("one", vec![vec_of(&[(1, 1)])]);
    let two = group("two", vec![vec_of(&[(1, 1)]), vec_of(&[(2, 1)])]);
    assert!(leave_out_estimate(&one, &two, &opts()).is_err());
    assert!(partisan_scores(&two, &one, &opts()).is_err());
    assert!(GroupCorpus::new("e", vec![("a".into(), PhraseVector::default())]).is_err());
    // empty vectors are excluded from N
    let g = GroupCorpus::new(
        "g",
        vec![("a".into(), PhraseVector::default()), ("b".into(), vec_of(&[(1, 1)]))],
    )
    .unwrap();
    assert_eq!(g.segment_count(), 1);
}
