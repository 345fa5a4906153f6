//! Domain sentiment lexicon built from pointwise mutual information.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::Sentiment;
use crate::text::{bigram_parts, Ngrams};

pub const LEXICON_VERSION: u32 = 1;
pub const DEFAULT_DF_THRESHOLD: u64 = 3;
pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("no documents")]
    Empty,
    #[error("document {0} is unlabeled")]
    Unlabeled(usize),
    #[error("no {0} documents")]
    MissingClass(Sentiment),
    #[error("smoothing must be finite and non-negative, got {0}")]
    Smoothing(f64),
    #[error("log base must be finite, positive and not 1, got {0}")]
    LogBase(f64),
    #[error("zero contingency cell for term {0:?}; use positive smoothing")]
    ZeroCell(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("lexicon file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("lexicon version {found} is not supported (expected {LEXICON_VERSION})")]
    Version { found: u32 },
}

pub type Result<T, E = LexiconError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TermDf {
    pub bullish: u64,
    pub bearish: u64,
}

impl TermDf {
    pub fn total(&self) -> u64 {
        self.bullish + self.bearish
    }

    fn class(&self, c: Sentiment) -> u64 {
        match c {
            Sentiment::Bullish => self.bullish,
            Sentiment::Bearish => self.bearish,
        }
    }
}

/// Document frequencies per class, for unigrams and bigram keys separately.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContingencyCounts {
    pub n_bullish_docs: u64,
    pub n_bearish_docs: u64,
    pub unigrams: BTreeMap<String, TermDf>,
    pub bigrams: BTreeMap<String, TermDf>,
    /// Terms seen at least once as (or containing) a negated verb.
    pub negative: BTreeSet<String>,
}

impl ContingencyCounts {
    pub fn n_docs(&self, c: Sentiment) -> u64 {
        match c {
            Sentiment::Bullish => self.n_bullish_docs,
            Sentiment::Bearish => self.n_bearish_docs,
        }
    }

    /// DF of a unigram or bigram key; zero when unseen.
    pub fn df(&self, term: &str) -> TermDf {
        let map = if bigram_parts(term).is_some() { &self.bigrams } else { &self.unigrams };
        map.get(term).copied().unwrap_or_default()
    }
}

/// Counts document frequencies (presence per document) over labeled documents.
pub fn count_contingency<'a, I>(docs: I) -> Result<ContingencyCounts>
where
    I: IntoIterator<Item = (&'a Ngrams, Option<Sentiment>)>,
{
    let mut counts = ContingencyCounts::default();
    let mut n = 0;
    for (i, (doc, label)) in docs.into_iter().enumerate() {
        n += 1;
        let label = label.ok_or(LexiconError::Unlabeled(i))?;
        let bump = |df: &mut TermDf| match label {
            Sentiment::Bullish => df.bullish += 1,
            Sentiment::Bearish => df.bearish += 1,
        };
        match label {
            Sentiment::Bullish => counts.n_bullish_docs += 1,
            Sentiment::Bearish => counts.n_bearish_docs += 1,
        }
        let uni: BTreeSet<&String> = doc.unigrams.iter().collect();
        for t in uni {
            bump(counts.unigrams.entry(t.clone()).or_default());
        }
        let bi: BTreeSet<&String> = doc.bigrams.iter().collect();
        for t in bi {
            bump(counts.bigrams.entry(t.clone()).or_default());
        }
        for (j, t) in doc.unigrams.iter().enumerate() {
            if doc.negative[j] {
                counts.negative.insert(t.clone());
            }
        }
        for (j, t) in doc.bigrams.iter().enumerate() {
            if doc.bigram_is_negative(j) {
                counts.negative.insert(t.clone());
            }
        }
    }
    if n == 0 {
        return Err(LexiconError::Empty);
    }
    Ok(counts)
}

/// Natural-log PMI between a term's presence and a class, with `smoothing`
/// added to each cell of the 2×2 presence/class table.
pub fn pmi(term: &str, class: Sentiment, counts: &ContingencyCounts, smoothing: f64) -> Result<f64> {
    pmi_from_df(counts.df(term), class, counts, smoothing).ok_or_else(|| LexiconError::ZeroCell(term.into()))
}

fn pmi_from_df(df: TermDf, class: Sentiment, counts: &ContingencyCounts, s: f64) -> Option<f64> {
    let other = class.opposite();
    let in_class = df.class(class) as f64 + s;
    let in_other = df.class(other) as f64 + s;
    let absent_class = (counts.n_docs(class) - df.class(class)) as f64 + s;
    // Integer sums keep N identical under a class swap.
    let n = (counts.n_bullish_docs + counts.n_bearish_docs) as f64 + 4.0 * s;
    let p_joint = in_class / n;
    let p_term = (in_class + in_other) / n;
    let p_class = (in_class + absent_class) / n;
    let v = (p_joint / (p_term * p_class)).ln();
    v.is_finite().then_some(v)
}

/// S_PMI(term) = PMI(term, bullish) − PMI(term, bearish), natural log.
pub fn score(term: &str, counts: &ContingencyCounts, smoothing: f64) -> Result<f64> {
    Ok(pmi(term, Sentiment::Bullish, counts, smoothing)? - pmi(term, Sentiment::Bearish, counts, smoothing)?)
}

fn score_df(term: &str, df: TermDf, counts: &ContingencyCounts, s: f64) -> Result<f64> {
    let bull = pmi_from_df(df, Sentiment::Bullish, counts, s);
    let bear = pmi_from_df(df, Sentiment::Bearish, counts, s);
    match (bull, bear) {
        (Some(a), Some(b)) => Ok(a - b),
        _ => Err(LexiconError::ZeroCell(term.into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Unigram,
    Bigram,
}

/// Bigram admission test against the sum of its constituents' scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigramRule {
    /// score > sum. Bearish bigrams only pass when their constituents are
    /// even more bearish.
    #[default]
    ExceedsSum,
    /// score > sum for bullish-leaning bigrams, score < sum for bearish ones.
    Directional,
}

impl BigramRule {
    pub fn admits(self, score: f64, constituent_sum: f64) -> bool {
        match self {
            Self::ExceedsSum => score > constituent_sum,
            Self::Directional if score >= 0.0 => score > constituent_sum,
            Self::Directional => score < constituent_sum,
        }
    }
}

impl std::str::FromStr for BigramRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exceeds_sum" => Ok(Self::ExceedsSum),
            "directional" => Ok(Self::Directional),
            _ => Err(format!("unknown bigram rule {s:?} (expected exceeds_sum or directional)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub term: String,
    pub kind: TermKind,
    pub score: f64,
    pub df: u64,
    #[serde(rename = "neg")]
    pub is_negative_verb: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexiconParams {
    pub df_threshold: u64,
    pub smoothing: f64,
    pub log_base: f64,
    pub bigram_rule: BigramRule,
}

impl Default for LexiconParams {
    fn default() -> Self {
        Self {
            df_threshold: DEFAULT_DF_THRESHOLD,
            smoothing: DEFAULT_SMOOTHING,
            log_base: std::f64::consts::E,
            bigram_rule: BigramRule::ExceedsSum,
        }
    }
}

impl LexiconParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(LexiconError::Smoothing(self.smoothing));
        }
        if !(self.log_base.is_finite() && self.log_base > 0.0 && self.log_base != 1.0) {
            return Err(LexiconError::LogBase(self.log_base));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    pub entries: BTreeMap<String, LexiconEntry>,
    pub params: LexiconParams,
    /// Free-form origin note written to the file header.
    pub provenance: Option<String>,
}

impl SentimentLexicon {
    pub fn empty(params: LexiconParams) -> Self {
        Self {
            entries: BTreeMap::new(),
            params,
            provenance: None,
        }
    }

    pub fn get(&self, term: &str) -> Option<&LexiconEntry> {
        self.entries.get(term)
    }

    pub fn score_of(&self, term: &str) -> Option<f64> {
        self.entries.get(term).map(|e| e.score)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn has_bigrams(&self) -> bool {
        self.iter().any(|e| e.kind == TermKind::Bigram)
    }
}

/// DF-qualified unigrams, plus bigrams scoring above their constituents.
pub fn build_lexicon(counts: &ContingencyCounts, params: LexiconParams) -> Result<SentimentLexicon> {
    params.validate()?;
    for c in [Sentiment::Bullish, Sentiment::Bearish] {
        if counts.n_docs(c) == 0 {
            return Err(LexiconError::MissingClass(c));
        }
    }
    let scale = params.log_base.ln();
    let mut lex = SentimentLexicon::empty(params);
    let qualified = |df: &TermDf| df.total() > params.df_threshold;

    for (term, df) in counts.unigrams.iter().filter(|(_, df)| qualified(df)) {
        let score = score_df(term, *df, counts, params.smoothing)? / scale;
        lex.entries.insert(
            term.clone(),
            LexiconEntry {
                term: term.clone(),
                kind: TermKind::Unigram,
                score,
                df: df.total(),
                is_negative_verb: counts.negative.contains(term),
            },
        );
    }
    let mut admitted = Vec::new();
    for (term, df) in counts.bigrams.iter().filter(|(_, df)| qualified(df)) {
        let score = score_df(term, *df, counts, params.smoothing)? / scale;
        let (left, right) = bigram_parts(term).expect("bigram keys contain the separator");
        let sum = lex.score_of(left).unwrap_or(0.0) + lex.score_of(right).unwrap_or(0.0);
        if params.bigram_rule.admits(score, sum) {
            admitted.push(LexiconEntry {
                term: term.clone(),
                kind: TermKind::Bigram,
                score,
                df: df.total(),
                is_negative_verb: counts.negative.contains(term),
            });
        }
    }
    for e in admitted {
        lex.entries.insert(e.term.clone(), e);
    }
    Ok(lex)
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    df_threshold: u64,
    smoothing: f64,
    log_base: f64,
    bigram_rule: BigramRule,
    entries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

pub fn write_lexicon<W: Write>(lex: &SentimentLexicon, mut w: W) -> std::io::Result<()> {
    let header = Header {
        version: LEXICON_VERSION,
        df_threshold: lex.params.df_threshold,
        smoothing: lex.params.smoothing,
        log_base: lex.params.log_base,
        bigram_rule: lex.params.bigram_rule,
        entries: lex.len(),
        provenance: lex.provenance.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for e in lex.iter() {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    w.flush()
}

pub fn read_lexicon<R: Read>(r: R) -> Result<SentimentLexicon> {
    let mut lines = BufReader::new(r).lines();
    let malformed = |line: usize, reason: String| LexiconError::Malformed { line, reason };
    let header_line = lines
        .next()
        .ok_or_else(|| malformed(1, "missing header".into()))?
        .map_err(|e| malformed(1, e.to_string()))?;
    let version = serde_json::from_str::<serde_json::Value>(&header_line)
        .map_err(|e| malformed(1, e.to_string()))?
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| malformed(1, "header has no version".into()))?;
    if version != u64::from(LEXICON_VERSION) {
        return Err(LexiconError::Version { found: version as u32 });
    }
    let header: Header = serde_json::from_str(&header_line).map_err(|e| malformed(1, e.to_string()))?;
    let params = LexiconParams {
        df_threshold: header.df_threshold,
        smoothing: header.smoothing,
        log_base: header.log_base,
        bigram_rule: header.bigram_rule,
    };
    params.validate().map_err(|e| malformed(1, e.to_string()))?;
    let mut lex = SentimentLexicon::empty(params);
    lex.provenance = header.provenance;
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.map_err(|e| malformed(n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let e: LexiconEntry = serde_json::from_str(&line).map_err(|e| malformed(n, e.to_string()))?;
        if !e.score.is_finite() {
            return Err(malformed(n, format!("non-finite score for {:?}", e.term)));
        }
        if (e.kind == TermKind::Bigram) != bigram_parts(&e.term).is_some() {
            return Err(malformed(n, format!("kind does not match term {:?}", e.term)));
        }
        if lex.entries.contains_key(&e.term) {
            return Err(malformed(n, format!("duplicate term {:?}", e.term)));
        }
        lex.entries.insert(e.term.clone(), e);
    }
    if lex.len() != header.entries {
        return Err(malformed(
            header.entries + 1,
            format!("expected {} entries, found {} (truncated?)", header.entries, lex.len()),
        ));
    }
    Ok(lex)
}

pub fn save_lexicon(lex: &SentimentLexicon, path: &Path) -> Result<()> {
    let io = |source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = File::create(path).map_err(io)?;
    write_lexicon(lex, BufWriter::new(f)).map_err(io)
}

pub fn load_lexicon(path: &Path) -> Result<SentimentLexicon> {
    let f = File::open(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_lexicon(f)
}
