use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub type TokenId = u32;

/// Lowercased tokens: maximal runs of letters/digits, with apostrophes kept
/// only between two alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text
        .chars()
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if c == '\''
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token interner. Ids are assigned in first-seen order.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Lexicon {
    words: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl From<Vec<String>> for Lexicon {
    fn from(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as TokenId))
            .collect();
        Lexicon { words, index }
    }
}

impl From<Lexicon> for Vec<String> {
    fn from(lex: Lexicon) -> Self {
        lex.words
    }
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
    }
}

impl Lexicon {
    pub fn intern(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len() as TokenId;
        assert!(id < TokenId::MAX, "lexicon overflow");
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }

    pub fn get(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> &str {
        &self.words[id as usize]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn encode(&mut self, text: &str) -> Vec<TokenId> {
        tokenize(text).iter().map(|t| self.intern(t)).collect()
    }

    /// Looks up every token of `text`; `None` if any token is unknown.
    pub fn lookup_phrase(&self, text: &str) -> Option<Vec<TokenId>> {
        tokenize(text).iter().map(|t| self.get(t)).collect()
    }
}

/// A unigram or bigram packed into one integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhraseKey(u64);

impl PhraseKey {
    const NONE: u64 = TokenId::MAX as u64;

    pub fn unigram(a: TokenId) -> Self {
        PhraseKey(((a as u64) << 32) | Self::NONE)
    }

    pub fn bigram(a: TokenId, b: TokenId) -> Self {
        PhraseKey(((a as u64) << 32) | b as u64)
    }

    pub fn tokens(self) -> (TokenId, Option<TokenId>) {
        let a = (self.0 >> 32) as TokenId;
        let b = (self.0 & Self::NONE) as TokenId;
        (a, (b != TokenId::MAX).then_some(b))
    }

    pub fn render(self, lexicon: &Lexicon) -> String {
        match self.tokens() {
            (a, None) => lexicon.word(a).to_string(),
            (a, Some(b)) => format!("{} {}", lexicon.word(a), lexicon.word(b)),
        }
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Sparse phrase counts of one segment, sorted by key.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseVector {
    entries: Vec<(PhraseKey, u32)>,
    total: u64,
}

impl PhraseVector {
    pub fn from_counts(counts: impl IntoIterator<Item = (PhraseKey, u32)>) -> Self {
        let mut map: HashMap<PhraseKey, u32> = HashMap::new();
        for (k, c) in counts {
            if c > 0 {
                *map.entry(k).or_default() += c;
            }
        }
        let mut entries: Vec<_> = map.into_iter().collect();
        entries.sort_unstable();
        let total = entries.iter().map(|&(_, c)| c as u64).sum();
        PhraseVector { entries, total }
    }

    pub fn entries(&self) -> &[(PhraseKey, u32)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn get(&self, key: PhraseKey) -> u32 {
        self.entries
            .binary_search_by_key(&key, |&(k, _)| k)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn to_strings(&self, lexicon: &Lexicon) -> std::collections::BTreeMap<String, u32> {
        self.entries
            .iter()
            .map(|&(k, c)| (k.render(lexicon), c))
            .collect()
    }
}

/// Stopword and confounder filters resolved against a lexicon.
#[derive(Clone, Debug, Default)]
pub struct PhraseFilter {
    stopwords: HashSet<TokenId>,
    /// first token -> confounder token sequences, longest first
    confounders: HashMap<TokenId, Vec<Vec<TokenId>>>,
}

impl PhraseFilter {
    pub fn new<'a>(
        lexicon: &Lexicon,
        stopwords: impl IntoIterator<Item = &'a str>,
        confounders: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let stopwords = stopwords
            .into_iter()
            .filter_map(|w| lexicon.get(&w.to_lowercase()))
            .collect();
        let mut map: HashMap<TokenId, Vec<Vec<TokenId>>> = HashMap::new();
        for phrase in confounders {
            // a confounder with a token the corpus never uses cannot match
            if let Some(ids) = lexicon.lookup_phrase(phrase) {
                if let Some(&first) = ids.first() {
                    map.entry(first).or_default().push(ids);
                }
            }
        }
        for seqs in map.values_mut() {
            seqs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            seqs.dedup();
        }
        PhraseFilter {
            stopwords,
            confounders: map,
        }
    }

    pub fn is_stopword(&self, token: TokenId) -> bool {
        self.stopwords.contains(&token)
    }

    pub fn stopwords(&self) -> &HashSet<TokenId> {
        &self.stopwords
    }

    /// Drops every token covered by a confounder match (longest match wins,
    /// scanning left to right).
    pub fn excise_confounders(&self, tokens: &[TokenId]) -> Vec<TokenId> {
        if self.confounders.is_empty() {
            return tokens.to_vec();
        }
        let mut kept = Vec::with_capacity(tokens.len());
        let mut i = 0;
        'outer: while i < tokens.len() {
            if let Some(seqs) = self.confounders.get(&tokens[i]) {
                for seq in seqs {
                    if tokens[i..].starts_with(seq) {
                        i += seq.len();
                        continue 'outer;
                    }
                }
            }
            kept.push(tokens[i]);
            i += 1;
        }
        kept
    }
}

/// Unigram and adjacent-bigram counts after confounder excision; phrases
/// made only of stopwords are dropped, mixed bigrams are kept.
pub fn phrase_counts(tokens: &[TokenId], filter: &PhraseFilter) -> PhraseVector {
    let kept = filter.excise_confounders(tokens);
    let mut phrases = Vec::with_capacity(kept.len() * 2);
    for (i, &t) in kept.iter().enumerate() {
        if !filter.is_stopword(t) {
            phrases.push((PhraseKey::unigram(t), 1));
        }
        if let Some(&next) = kept.get(i + 1) {
            if !(filter.is_stopword(t) && filter.is_stopword(next)) {
                phrases.push((PhraseKey::bigram(t, next), 1));
            }
        }
    }
    PhraseVector::from_counts(phrases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn counts(text: &str, stop: &[&str], conf: &[&str]) -> BTreeMap<String, u32> {
        let mut lex = Lexicon::default();
        let tokens = lex.encode(text);
        let filter = PhraseFilter::new(&lex, stop.iter().copied(), conf.iter().copied());
        phrase_counts(&tokens, &filter).to_strings(&lex)
    }

    fn total(map: &BTreeMap<String, u32>) -> u32 {
        map.values().sum()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The Border-Patrol, don't 'quote' U.S. 2020!"), vec![
            "the", "border", "patrol", "don't", "quote", "u", "s", "2020"
        ]);
        assert_eq!(tokenize("it\u{2019}s"), vec!["it's"]);
        assert!(tokenize("... -- !!").is_empty());
    }

    #[test]
    fn unfiltered_counts() {
        let c = counts("the border patrol", &[], &[]);
        let expected: BTreeMap<String, u32> = [
            ("the", 1), ("border", 1), ("patrol", 1), ("the border", 1), ("border patrol", 1),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(c, expected);
        assert_eq!(total(&c), 5);
    }

    #[test]
    fn stopword_only_phrases_dropped() {
        let c = counts("the border patrol", &["the"], &[]);
        assert!(!c.contains_key("the"));
        assert!(c.contains_key("the border"));
        assert_eq!(total(&c), 4);
        let c = counts("of the wall", &["of", "the"], &[]);
        assert_eq!(c.keys().cloned().collect::<Vec<_>>(), vec!["the wall", "wall"]);
    }

    #[test]
    fn confounders_excised() {
        let c = counts("tucker carlson tonight", &[], &["tucker carlson"]);
        assert_eq!(c.keys().cloned().collect::<Vec<_>>(), vec!["tonight"]);
        // inserting a confounder anywhere leaves counts unchanged
        assert_eq!(
            counts("big tucker carlson wall", &[], &["Tucker Carlson"]),
            counts("big wall", &[], &[])
        );
        // unknown confounder is inert
        assert_eq!(counts("a b", &[], &["zzz"]), counts("a b", &[], &[]));
    }

    #[test]
    fn repeated_phrases_accumulate() {
        let c = counts("wall wall wall", &[], &[]);
        assert_eq!(c["wall"], 3);
        assert_eq!(c["wall wall"], 2);
    }

    #[test]
    fn phrase_key_round_trip() {
        let k = PhraseKey::bigram(3, 7);
        assert_eq!(k.tokens(), (3, Some(7)));
        assert_eq!(PhraseKey::unigram(0).tokens(), (0, None));
    }

    proptest! {
        #[test]
        fn total_is_two_n_minus_one(words in prop::collection::vec("[a-e]{1,3}", 1..60)) {
            let mut lex = Lexicon::default();
            let tokens = lex.encode(&words.join(" "));
            let v = phrase_counts(&tokens, &PhraseFilter::default());
            prop_assert_eq!(v.total(), 2 * tokens.len() as u64 - 1);
            prop_assert_eq!(v.total(), v.entries().iter().map(|e| e.1 as u64).sum::<u64>());
            prop_assert!(v.entries().iter().all(|e| e.1 > 0));
        }
    }
}
