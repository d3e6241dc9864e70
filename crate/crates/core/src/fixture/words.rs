use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

/// Hands out pronounceable pseudo-words, never the same one twice.
pub(super) struct WordBank {
    used: HashSet<String>,
}

impl WordBank {
    pub(super) fn new<'a>(reserved: impl IntoIterator<Item = &'a str>) -> Self {
        WordBank {
            used: reserved.into_iter().map(str::to_string).collect(),
        }
    }

    pub(super) fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
                w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
            }
            if rng.gen_bool(0.4) {
                w.push(['n', 'r', 's', 'm'][rng.gen_range(0..4)]);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    pub(super) fn many(&mut self, rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
        (0..n).map(|_| self.fresh(rng)).collect()
    }
}
