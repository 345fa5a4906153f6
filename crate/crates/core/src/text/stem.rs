//! Pluggable stemming and n-gram extraction.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use super::colloquial::colloquial_to_formal;
use super::normalize::{normalize, ZWNJ};
use super::TextError;

/// Prefix marking the stem of a negated verb.
pub const NEGATION_MARKER: char = '!';
/// Joins the two stems of a bigram key. Tokens never contain whitespace.
pub const BIGRAM_SEPARATOR: char = ' ';

const BUNDLED_DICTIONARY: &str = include_str!("../../data/stemmer.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemEntry {
    pub stem: String,
    pub is_negative_verb: bool,
    pub category: String,
}

impl StemEntry {
    pub fn is_verb(&self) -> bool {
        self.category == "V"
    }
}

/// A morphological analyzer that knows formal word forms.
pub trait Stemmer: Send + Sync {
    fn lookup(&self, word: &str) -> Option<StemEntry>;
}

/// Flat surface → stem dictionary.
#[derive(Debug, Clone, Default)]
pub struct DictionaryStemmer {
    entries: HashMap<String, StemEntry>,
}

impl DictionaryStemmer {
    pub fn new() -> Self {
        Self::default()
    }

    /// The small dictionary shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_tsv(BUNDLED_DICTIONARY.as_bytes()).expect("bundled dictionary is well-formed")
    }

    /// Reads `surface<TAB>stem<TAB>neg{0,1}<TAB>category` lines. Blank lines
    /// and lines starting with `#` are skipped. Surfaces are normalized.
    pub fn from_tsv<R: Read>(reader: R) -> Result<Self, TextError> {
        let mut dict = Self::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| TextError::Dictionary {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |reason: &str| TextError::Dictionary {
                line: i + 1,
                reason: reason.to_string(),
            };
            let [surface, stem, neg, category] = fields[..] else {
                return Err(bad("expected 4 tab-separated fields"));
            };
            let is_negative_verb = match neg.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad("negation flag must be 0 or 1")),
            };
            if stem.trim().is_empty() {
                return Err(bad("empty stem"));
            }
            dict.insert(
                surface,
                StemEntry {
                    stem: normalize(stem),
                    is_negative_verb,
                    category: category.trim().to_string(),
                },
            );
        }
        Ok(dict)
    }

    pub fn insert(&mut self, surface: &str, entry: StemEntry) {
        self.entries.insert(normalize(surface), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Stemmer for DictionaryStemmer {
    fn lookup(&self, word: &str) -> Option<StemEntry> {
        self.entries.get(word).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub stem: String,
    pub is_negative_verb: bool,
}

impl Token {
    fn from_entry(surface: &str, entry: StemEntry, negated: bool) -> Self {
        let is_negative_verb = negated || entry.is_negative_verb;
        let stem = if is_negative_verb && !entry.stem.starts_with(NEGATION_MARKER) {
            format!("{NEGATION_MARKER}{}", entry.stem)
        } else {
            entry.stem
        };
        Self {
            surface: surface.to_string(),
            stem,
            is_negative_verb,
        }
    }
}

fn lookup_with_rewrites(word: &str, stemmer: &dyn Stemmer) -> Option<StemEntry> {
    stemmer
        .lookup(word)
        .or_else(|| colloquial_to_formal(word).iter().find_map(|c| stemmer.lookup(c)))
}

/// The affirmative form under a negation prefix («نمی‌ره» → «می‌ره»,
/// «نرفت» → «رفت»), and whether it came from the continuous prefix.
fn strip_negation(word: &str) -> Option<(&str, bool)> {
    let rest = word.strip_prefix('ن')?;
    let continuous = rest.starts_with("می");
    (rest.chars().filter(|&c| c != ZWNJ).count() >= 2).then_some((rest, continuous))
}

/// Stems one normalized word: the word itself, then its colloquial rewrites,
/// then the negated-verb fallback. Unknown words are their own stem.
pub fn stem(word: &str, stemmer: &dyn Stemmer) -> Token {
    if let Some(entry) = lookup_with_rewrites(word, stemmer) {
        return Token::from_entry(word, entry, false);
    }
    if let Some((rest, continuous)) = strip_negation(word) {
        if let Some(entry) = lookup_with_rewrites(rest, stemmer) {
            // A bare «ن» prefix only marks negation in front of a known verb.
            if continuous || entry.is_verb() {
                return Token::from_entry(word, entry, true);
            }
        }
    }
    let is_negative_verb = strip_negation(word).is_some_and(|(_, continuous)| continuous);
    Token {
        surface: word.to_string(),
        stem: word.to_string(),
        is_negative_verb,
    }
}

/// Unigram and bigram terms of one document. `bigrams[i]` spans
/// `unigrams[i]` and `unigrams[i + 1]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Ngrams {
    pub unigrams: Vec<String>,
    pub bigrams: Vec<String>,
    /// Parallel to `unigrams`.
    pub negative: Vec<bool>,
}

impl Ngrams {
    pub fn len(&self) -> usize {
        self.unigrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unigrams.is_empty()
    }

    pub fn bigram_is_negative(&self, i: usize) -> bool {
        self.negative[i] || self.negative[i + 1]
    }
}

pub fn bigram_key(left: &str, right: &str) -> String {
    format!("{left}{BIGRAM_SEPARATOR}{right}")
}

/// Splits a bigram key into its constituent stems.
pub fn bigram_parts(key: &str) -> Option<(&str, &str)> {
    key.split_once(BIGRAM_SEPARATOR)
}

/// Unigrams are the token stems. Each adjacent pair is first looked up as a
/// whole phrase; otherwise its key joins the constituent stems.
pub fn extract_ngrams(tokens: &[Token], stemmer: &dyn Stemmer) -> Ngrams {
    let unigrams = tokens.iter().map(|t| t.stem.clone()).collect();
    let negative = tokens.iter().map(|t| t.is_negative_verb).collect();
    let bigrams = tokens
        .windows(2)
        .map(|pair| {
            let phrase = bigram_key(&pair[0].surface, &pair[1].surface);
            match stemmer.lookup(&phrase) {
                Some(e) if bigram_parts(&e.stem).is_some() => e.stem,
                _ => bigram_key(&pair[0].stem, &pair[1].stem),
            }
        })
        .collect();
    Ngrams {
        unigrams,
        bigrams,
        negative,
    }
}
