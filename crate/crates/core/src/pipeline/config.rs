use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveTime};
use chrono_tz::Tz;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::classifier::{Algorithm, DEFAULT_BAGGING_SIZE, DEFAULT_CONFIDENCE, DEFAULT_FOLDS, DEFAULT_MIN_LEAF};
use crate::econometrics::{Correction, DEFAULT_ALPHA, DEFAULT_MAX_LAG, DEFAULT_TRAIN_FRACTION};
use crate::indicators::{MissingPolicy, DEFAULT_TC};
use crate::ingest::CommentFormat;
use crate::lexicon::{BigramRule, DEFAULT_DF_THRESHOLD, DEFAULT_SMOOTHING};

use super::PipelineError;

/// Series a model may draw regressors from.
pub const CANDIDATE_SERIES: [&str; 6] = ["index1", "index2", "index3", "index4", "count", "count_with_likes"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Return,
    Close,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Return => "return",
            Self::Close => "close",
        }
    }
}

impl FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "return" => Ok(Self::Return),
            "close" => Ok(Self::Close),
            _ => Err(format!("expected return or close, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub comments: PathBuf,
    pub comments_format: Option<CommentFormat>,
    pub market: PathBuf,
    pub symbol: Option<String>,
    pub stemmer_dict: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Pre-built lexicon used instead of the `build-lexicon` output.
    pub lexicon: Option<PathBuf>,
    /// Pre-trained classifier used instead of the `train` output.
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub timezone: Tz,
    pub cutoff: NaiveTime,
    pub df_threshold: u64,
    pub smoothing: f64,
    pub log_base: f64,
    pub bigram_rule: BigramRule,
    pub algorithm: Algorithm,
    pub bagging_size: usize,
    pub confidence: Option<f64>,
    pub min_leaf: f64,
    /// 0 skips cross-validation.
    pub k_folds: usize,
    pub include_score: bool,
    pub seed: u64,
    /// Defaults to the training segment of the trading calendar.
    pub trust_window: Option<(NaiveDate, NaiveDate)>,
    pub default_tc: f64,
    pub missing_policy: MissingPolicy,
    pub target: Target,
    pub candidates: Vec<String>,
    pub max_lag: usize,
    pub alpha: f64,
    pub correction: Correction,
    pub train_fraction: f64,
}

/// Every recognised key, in rendering order.
pub const KEYS: &[&str] = &[
    "comments",
    "comments_format",
    "market",
    "symbol",
    "stemmer_dict",
    "stopwords",
    "lexicon",
    "model",
    "out",
    "timezone",
    "cutoff",
    "df_threshold",
    "smoothing",
    "log_base",
    "bigram_rule",
    "algorithm",
    "bagging_size",
    "confidence",
    "min_leaf",
    "k_folds",
    "include_score",
    "seed",
    "trust_window",
    "default_tc",
    "missing_policy",
    "target",
    "candidates",
    "max_lag",
    "alpha",
    "correction",
    "train_fraction",
];

const PATH_KEYS: &[&str] = &["comments", "market", "stemmer_dict", "stopwords", "lexicon", "model", "out"];

fn default_value(key: &str) -> Option<String> {
    let v = match key {
        "out" => "out".to_string(),
        "timezone" => "Asia/Tehran".into(),
        "cutoff" => "12:30".into(),
        "df_threshold" => DEFAULT_DF_THRESHOLD.to_string(),
        "smoothing" => DEFAULT_SMOOTHING.to_string(),
        "log_base" => "e".into(),
        "bigram_rule" => "exceeds_sum".into(),
        "algorithm" => Algorithm::Bagging.as_str().into(),
        "bagging_size" => DEFAULT_BAGGING_SIZE.to_string(),
        "confidence" => DEFAULT_CONFIDENCE.to_string(),
        "min_leaf" => DEFAULT_MIN_LEAF.to_string(),
        "k_folds" => DEFAULT_FOLDS.to_string(),
        "include_score" => "true".into(),
        "seed" => "0".into(),
        "default_tc" => DEFAULT_TC.to_string(),
        "missing_policy" => MissingPolicy::default().as_str().into(),
        "target" => "return".into(),
        "candidates" => CANDIDATE_SERIES.join(","),
        "max_lag" => DEFAULT_MAX_LAG.to_string(),
        "alpha" => DEFAULT_ALPHA.to_string(),
        "correction" => Correction::default().as_str().into(),
        "train_fraction" => DEFAULT_TRAIN_FRACTION.to_string(),
        _ => return None,
    };
    Some(v)
}

/// Raw string values before typing; file values first, overrides on top.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses a flat TOML table. Relative paths are taken relative to the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| PipelineError::Config(vec![e.to_string()]))?;
        let mut raw = Self::default();
        let mut errors = Vec::new();
        for (k, v) in table {
            let s = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                toml::Value::Array(items) => {
                    let parts: Vec<String> = items
                        .into_iter()
                        .map(|i| match i {
                            toml::Value::String(s) => s,
                            other => other.to_string(),
                        })
                        .collect();
                    parts.join(",")
                }
                other => {
                    errors.push(format!("{k}: unsupported value {other}"));
                    continue;
                }
            };
            let s = if PATH_KEYS.contains(&k.as_str()) && !s.is_empty() && Path::new(&s).is_relative() {
                base.join(&s).display().to_string()
            } else {
                s
            };
            raw.values.insert(k, s);
        }
        if errors.is_empty() {
            Ok(raw)
        } else {
            Err(PipelineError::Config(errors))
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), PipelineError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(vec![format!("override {pair:?} is not key=value")]))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned().or_else(|| default_value(key))
    }

    /// Types and checks every key, reporting all problems at once.
    pub fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let mut errors: Vec<String> = self
            .values
            .keys()
            .filter(|k| !KEYS.contains(&k.as_str()))
            .map(|k| format!("{k}: unknown key"))
            .collect();

        fn parsed<T: FromStr>(raw: &RawConfig, key: &str, errors: &mut Vec<String>, fallback: T) -> T
        where
            T::Err: std::fmt::Display,
        {
            match raw.get(key) {
                Some(s) => s.parse().unwrap_or_else(|e| {
                    errors.push(format!("{key}: {e}"));
                    fallback
                }),
                None => {
                    errors.push(format!("{key}: required"));
                    fallback
                }
            }
        }
        let optional = |key: &str| self.get(key).filter(|s| !s.is_empty() && s != "none");
        let path = |key: &str, errors: &mut Vec<String>| match optional(key) {
            Some(p) => PathBuf::from(p),
            None => {
                errors.push(format!("{key}: required"));
                PathBuf::new()
            }
        };

        let comments = path("comments", &mut errors);
        let market = path("market", &mut errors);
        let out = path("out", &mut errors);
        let comments_format = match optional("comments_format") {
            Some(s) => s.parse().map_err(|e| errors.push(format!("comments_format: {e}"))).ok(),
            None => match comments.extension().and_then(|e| e.to_str()) {
                Some("jsonl") | Some("json") => Some(CommentFormat::Jsonl),
                _ => Some(CommentFormat::Csv),
            },
        };
        let timezone: Tz = match self.get("timezone") {
            Some(s) => s.parse().unwrap_or_else(|e| {
                errors.push(format!("timezone: {e}"));
                chrono_tz::UTC
            }),
            None => chrono_tz::UTC,
        };
        let cutoff = match self.get("cutoff") {
            Some(s) => NaiveTime::parse_from_str(&s, "%H:%M")
                .or_else(|_| NaiveTime::parse_from_str(&s, "%H:%M:%S"))
                .unwrap_or_else(|_| {
                    errors.push(format!("cutoff: {s:?} is not HH:MM"));
                    NaiveTime::MIN
                }),
            None => NaiveTime::MIN,
        };
        let log_base = match self.get("log_base").as_deref() {
            Some("e") | None => std::f64::consts::E,
            Some(s) => s.parse().unwrap_or_else(|e| {
                errors.push(format!("log_base: {e}"));
                std::f64::consts::E
            }),
        };
        let confidence = match optional("confidence") {
            None => None,
            Some(s) => Some(s.parse().unwrap_or_else(|e| {
                errors.push(format!("confidence: {e}"));
                DEFAULT_CONFIDENCE
            })),
        };
        let trust_window = optional("trust_window").and_then(|s| {
            let parse = |d: &str| NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d");
            match s.split_once("..").map(|(a, b)| (parse(a), parse(b))) {
                Some((Ok(a), Ok(b))) if a <= b => Some((a, b)),
                _ => {
                    errors.push(format!("trust_window: {s:?} is not YYYY-MM-DD..YYYY-MM-DD with start ≤ end"));
                    None
                }
            }
        });
        let candidates: Vec<String> = self
            .get("candidates")
            .unwrap_or_default()
            .split(',')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        for c in &candidates {
            if !CANDIDATE_SERIES.contains(&c.as_str()) {
                errors.push(format!("candidates: unknown series {c:?} (expected some of {})", CANDIDATE_SERIES.join(", ")));
            }
        }
        let cfg = PipelineConfig {
            comments,
            comments_format,
            market,
            symbol: optional("symbol"),
            stemmer_dict: optional("stemmer_dict").map(PathBuf::from),
            stopwords: optional("stopwords").map(PathBuf::from),
            lexicon: optional("lexicon").map(PathBuf::from),
            model: optional("model").map(PathBuf::from),
            out,
            timezone,
            cutoff,
            df_threshold: parsed(self, "df_threshold", &mut errors, DEFAULT_DF_THRESHOLD),
            smoothing: parsed(self, "smoothing", &mut errors, DEFAULT_SMOOTHING),
            log_base,
            bigram_rule: parsed(self, "bigram_rule", &mut errors, BigramRule::default()),
            algorithm: parsed(self, "algorithm", &mut errors, Algorithm::Bagging),
            bagging_size: parsed(self, "bagging_size", &mut errors, DEFAULT_BAGGING_SIZE),
            confidence,
            min_leaf: parsed(self, "min_leaf", &mut errors, DEFAULT_MIN_LEAF),
            k_folds: parsed(self, "k_folds", &mut errors, DEFAULT_FOLDS),
            include_score: parsed(self, "include_score", &mut errors, true),
            seed: parsed(self, "seed", &mut errors, 0),
            trust_window,
            default_tc: parsed(self, "default_tc", &mut errors, DEFAULT_TC),
            missing_policy: parsed(self, "missing_policy", &mut errors, MissingPolicy::default()),
            target: parsed(self, "target", &mut errors, Target::Return),
            candidates,
            max_lag: parsed(self, "max_lag", &mut errors, DEFAULT_MAX_LAG),
            alpha: parsed(self, "alpha", &mut errors, DEFAULT_ALPHA),
            correction: parsed(self, "correction", &mut errors, Correction::default()),
            train_fraction: parsed(self, "train_fraction", &mut errors, DEFAULT_TRAIN_FRACTION),
        };
        cfg.check_ranges(&mut errors);
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(PipelineError::Config(errors))
        }
    }
}

impl PipelineConfig {
    fn check_ranges(&self, errors: &mut Vec<String>) {
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };
        need(self.df_threshold >= 1, "df_threshold: must be at least 1".into());
        need(self.smoothing >= 0.0 && self.smoothing.is_finite(), format!("smoothing: must be ≥ 0, got {}", self.smoothing));
        need(
            self.log_base > 0.0 && self.log_base != 1.0 && self.log_base.is_finite(),
            format!("log_base: must be positive and not 1, got {}", self.log_base),
        );
        need(self.bagging_size >= 1, "bagging_size: must be at least 1".into());
        if let Some(cf) = self.confidence {
            need(cf > 0.0 && cf <= 0.5, format!("confidence: must lie in (0, 0.5], got {cf}"));
        }
        need(self.min_leaf > 0.0, format!("min_leaf: must be positive, got {}", self.min_leaf));
        need(self.k_folds != 1, "k_folds: must be 0 (skip) or at least 2".into());
        need(
            self.default_tc >= 0.0 && self.default_tc.is_finite(),
            format!("default_tc: must be ≥ 0, got {}", self.default_tc),
        );
        need(self.max_lag >= 1, "max_lag: must be at least 1".into());
        need(self.alpha > 0.0 && self.alpha < 1.0, format!("alpha: must lie in (0, 1), got {}", self.alpha));
        need(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            format!("train_fraction: must lie in (0, 1), got {}", self.train_fraction),
        );
        need(!self.candidates.is_empty(), "candidates: at least one series is required".into());
    }

    /// Canonical `key = value` lines of every setting that can affect results.
    pub fn canonical(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let lines = [
            ("comments", self.comments.display().to_string()),
            (
                "comments_format",
                match self.comments_format {
                    Some(CommentFormat::Jsonl) => "jsonl".into(),
                    _ => "csv".into(),
                },
            ),
            ("market", self.market.display().to_string()),
            ("symbol", self.symbol.clone().unwrap_or_else(|| "none".into())),
            ("stemmer_dict", opt(&self.stemmer_dict)),
            ("stopwords", opt(&self.stopwords)),
            ("lexicon", opt(&self.lexicon)),
            ("model", opt(&self.model)),
            ("timezone", self.timezone.name().to_string()),
            ("cutoff", self.cutoff.format("%H:%M:%S").to_string()),
            ("df_threshold", self.df_threshold.to_string()),
            ("smoothing", self.smoothing.to_string()),
            ("log_base", self.log_base.to_string()),
            ("bigram_rule", format!("{:?}", self.bigram_rule)),
            ("algorithm", self.algorithm.to_string()),
            ("bagging_size", self.bagging_size.to_string()),
            ("confidence", self.confidence.map_or("none".into(), |c| c.to_string())),
            ("min_leaf", self.min_leaf.to_string()),
            ("k_folds", self.k_folds.to_string()),
            ("include_score", self.include_score.to_string()),
            ("seed", self.seed.to_string()),
            ("trust_window", self.trust_window.map_or("none".into(), |(a, b)| format!("{a}..{b}"))),
            ("default_tc", self.default_tc.to_string()),
            ("missing_policy", self.missing_policy.as_str().into()),
            ("target", self.target.as_str().into()),
            ("candidates", self.candidates.join(",")),
            ("max_lag", self.max_lag.to_string()),
            ("alpha", self.alpha.to_string()),
            ("correction", self.correction.as_str().into()),
            ("train_fraction", self.train_fraction.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical form; the output directory is not part of it.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
