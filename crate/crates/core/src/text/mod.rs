//! Persian forum-text preprocessing.

mod colloquial;
mod normalize;
mod stem;

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};
use std::sync::Arc;

pub use colloquial::{colloquial_to_formal, Applicability, TransformRule, TRANSFORM_RULES};
pub use normalize::{normalize, NEGATIVE_WORD, POSITIVE_WORD, ZWNJ};
pub use stem::{
    bigram_key, bigram_parts, extract_ngrams, stem, DictionaryStemmer, Ngrams, StemEntry, Stemmer,
    Token, BIGRAM_SEPARATOR, NEGATION_MARKER,
};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("stemmer dictionary line {line}: {reason}")]
    Dictionary { line: usize, reason: String },
    #[error("stopword list: {0}")]
    Stopwords(#[from] std::io::Error),
}

fn keeps(ch: char) -> bool {
    ch.is_alphanumeric() || ch == ZWNJ || matches!(ch, '\u{064B}'..='\u{065F}' | '\u{0670}')
}

/// Splits normalized text into word tokens. Half-spaces stay inside tokens;
/// whitespace and punctuation delimit and are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !keeps(c))
        .map(|t| t.trim_matches(ZWNJ))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList(HashSet<String>);

impl StopList {
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_STOPWORDS.as_bytes()).expect("bundled stopwords are valid UTF-8")
    }

    /// One token per line; blank lines and `#` comments skipped.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, TextError> {
        let mut set = HashSet::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            let w = line.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            set.insert(normalize(w));
        }
        Ok(Self(set))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// normalize → tokenize → stopwords → stem → n-grams.
#[derive(Clone)]
pub struct Preprocessor {
    stemmer: Arc<dyn Stemmer>,
    stopwords: StopList,
}

impl Preprocessor {
    pub fn new(stemmer: Arc<dyn Stemmer>, stopwords: StopList) -> Self {
        Self { stemmer, stopwords }
    }

    pub fn bundled() -> Self {
        Self::new(Arc::new(DictionaryStemmer::bundled()), StopList::bundled())
    }

    pub fn tokens(&self, text: &str) -> Vec<Token> {
        remove_stopwords(tokenize(&normalize(text)), &self.stopwords)
            .iter()
            .map(|w| stem(w, self.stemmer.as_ref()))
            .collect()
    }

    pub fn process(&self, text: &str) -> Ngrams {
        extract_ngrams(&self.tokens(text), self.stemmer.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_keeps_half_space() {
        assert_eq!(tokenize("می‌رود بالا"), ["می‌رود", "بالا"]);
    }

    #[test]
    fn tokenize_empty_and_punctuation() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("صف خرید!"), ["صف", "خرید"]);
        assert_eq!(tokenize("سود، ضرر؟ (سهم)"), ["سود", "ضرر", "سهم"]);
    }

    #[test]
    fn stopword_filtering() {
        let toks: Vec<String> = ["این", "سهم", "خوبه"].iter().map(|s| s.to_string()).collect();
        let stop: StopList = ["این"].into_iter().collect();
        assert_eq!(remove_stopwords(toks.clone(), &stop), ["سهم", "خوبه"]);
        assert_eq!(remove_stopwords(toks.clone(), &StopList::default()), toks);
        let all: StopList = toks.iter().cloned().collect();
        assert!(remove_stopwords(toks, &all).is_empty());
    }

    #[test]
    fn bundled_stopwords_load() {
        let s = StopList::bundled();
        assert!(s.contains("این"));
        assert!(!s.contains("بالا"));
    }

    #[test]
    fn preprocessor_end_to_end() {
        let p = Preprocessor::bundled();
        let g = p.process("این سهم بالا نمیره @ali +++");
        assert_eq!(g.bigrams.len(), g.unigrams.len() - 1);
        assert!(g.negative.iter().any(|&n| n));
        assert!(g.unigrams.contains(&POSITIVE_WORD.to_string()));
    }

    proptest! {
        #[test]
        fn normalized_tokens_never_carry_markup(s in "\\PC{0,40}") {
            for t in tokenize(&normalize(&s)) {
                prop_assert!(!t.contains(['@', '#', '+', '-']), "token {:?}", t);
            }
        }
    }
}
