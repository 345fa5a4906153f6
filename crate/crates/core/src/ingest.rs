//! Comment corpora and market data: loading, validation and alignment of
//! comments to the trading day whose close they can inform.
//!
//! Comments CSV header: `id,timestamp,user,text,label,likes` with `label` one
//! of `bullish`, `bearish`, `none`. The JSONL variant carries one object per
//! line with the same keys. Market CSV header: `date,close`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

/// Tehran Stock Exchange session close, the default day-assignment cutoff.
pub const DEFAULT_CUTOFF: (u32, u32) = (12, 30);
pub const DEFAULT_TIMEZONE: Tz = chrono_tz::Asia::Tehran;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: field `{field}`: {reason}")]
    Field {
        row: usize,
        field: &'static str,
        reason: String,
    },
    #[error("row {row}: malformed record: {reason}")]
    Malformed { row: usize, reason: String },
    #[error("row {row}: duplicate comment id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: unknown label `{value}` (expected bullish, bearish or none)")]
    UnknownLabel { row: usize, value: String },
    #[error("duplicate market date {0}")]
    DuplicateDate(NaiveDate),
    #[error("row {row}: non-positive close {close} on {date}")]
    NonPositiveClose { row: usize, date: NaiveDate, close: f64 },
    #[error("market series is empty")]
    EmptyMarket,
    #[error("{} comment(s) fall after the last trading date: {}", .0.len(), .0.join(", "))]
    Orphaned(Vec<String>),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// Direction a comment expresses about the next price move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Bullish,
    Bearish,
}

impl Sentiment {
    pub fn opposite(self) -> Self {
        match self {
            Sentiment::Bullish => Sentiment::Bearish,
            Sentiment::Bearish => Sentiment::Bullish,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Bullish => "bullish",
            Sentiment::Bearish => "bearish",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bullish" => Ok(Sentiment::Bullish),
            "bearish" => Ok(Sentiment::Bearish),
            other => Err(format!("unknown sentiment `{other}`")),
        }
    }
}

/// Parses the on-disk label vocabulary; `none` means unlabeled.
pub fn parse_label(value: &str) -> Option<Option<Sentiment>> {
    match value {
        "bullish" => Some(Some(Sentiment::Bullish)),
        "bearish" => Some(Some(Sentiment::Bearish)),
        "none" => Some(None),
        _ => None,
    }
}

pub fn label_str(label: Option<Sentiment>) -> &'static str {
    label.map_or("none", Sentiment::as_str)
}

/// One forum post.
#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub user: String,
    pub text: String,
    pub label: Option<Sentiment>,
    pub likes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommentCorpus {
    pub stock_symbol: String,
    /// Sorted by timestamp ascending; ids unique.
    pub comments: Vec<Comment>,
}

impl CommentCorpus {
    /// Validates and sorts an arbitrary list of comments.
    pub fn new(stock_symbol: impl Into<String>, mut comments: Vec<Comment>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, c) in comments.iter().enumerate() {
            if !seen.insert(c.id.as_str()) {
                return Err(IngestError::DuplicateId {
                    row: i + 1,
                    id: c.id.clone(),
                });
            }
        }
        // Stable: equal timestamps keep file order.
        comments.sort_by_key(|c| c.timestamp);
        Ok(Self {
            stock_symbol: stock_symbol.into(),
            comments,
        })
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn label_counts(&self) -> (usize, usize, usize) {
        self.comments
            .iter()
            .fold((0, 0, 0), |(bull, bear, none), c| match c.label {
                Some(Sentiment::Bullish) => (bull + 1, bear, none),
                Some(Sentiment::Bearish) => (bull, bear + 1, none),
                None => (bull, bear, none + 1),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommentFormat {
    Csv,
    Jsonl,
}

impl FromStr for CommentFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown comment format `{other}` (csv or jsonl)")),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawComment {
    id: String,
    timestamp: String,
    user: String,
    text: String,
    label: String,
    likes: serde_json::Value,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a comment file. The stock symbol is taken from the file stem.
pub fn load_comments(path: &Path, format: CommentFormat, tz: Tz) -> Result<CommentCorpus> {
    let file = File::open(path).map_err(io_err(path))?;
    let symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        CommentFormat::Csv => read_comments_csv(file, &symbol, tz),
        CommentFormat::Jsonl => read_comments_jsonl(BufReader::new(file), &symbol, tz),
    }
}

pub fn read_comments_csv<R: Read>(reader: R, symbol: &str, tz: Tz) -> Result<CommentCorpus> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Malformed {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    let expected = ["id", "timestamp", "user", "text", "label", "likes"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(IngestError::Malformed {
            row: 0,
            reason: format!("header must be `{}`", expected.join(",")),
        });
    }
    let mut comments = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| IngestError::Malformed {
            row,
            reason: e.to_string(),
        })?;
        if record.len() != expected.len() {
            return Err(IngestError::Malformed {
                row,
                reason: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        let raw = RawComment {
            id: record[0].to_string(),
            timestamp: record[1].to_string(),
            user: record[2].to_string(),
            text: record[3].to_string(),
            label: record[4].to_string(),
            likes: serde_json::Value::String(record[5].to_string()),
        };
        comments.push(validate(raw, row, tz)?);
    }
    finish(symbol, comments)
}

pub fn read_comments_jsonl<R: BufRead>(reader: R, symbol: &str, tz: Tz) -> Result<CommentCorpus> {
    let mut comments = Vec::new();
    let mut row = 0;
    for line in reader.lines() {
        let line = line.map_err(|source| IngestError::Io {
            path: symbol.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let raw: RawComment = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            row,
            reason: e.to_string(),
        })?;
        comments.push(validate(raw, row, tz)?);
    }
    finish(symbol, comments)
}

fn finish(symbol: &str, comments: Vec<Comment>) -> Result<CommentCorpus> {
    // Row numbers in duplicate errors refer to file order, which `new` preserves.
    CommentCorpus::new(symbol, comments)
}

fn validate(raw: RawComment, row: usize, tz: Tz) -> Result<Comment> {
    let field = |field: &'static str, reason: String| IngestError::Field { row, field, reason };
    let id = raw.id.trim().to_string();
    if id.is_empty() {
        return Err(field("id", "empty".into()));
    }
    let timestamp = parse_timestamp(raw.timestamp.trim(), tz).map_err(|r| field("timestamp", r))?;
    if raw.text.trim().is_empty() {
        return Err(field("text", "empty after trimming whitespace".into()));
    }
    let label = parse_label(raw.label.trim()).ok_or_else(|| IngestError::UnknownLabel {
        row,
        value: raw.label.clone(),
    })?;
    let likes = match &raw.likes {
        serde_json::Value::Number(n) => n.as_u64(),
        serde_json::Value::String(s) => s.trim().parse::<u64>().ok(),
        _ => None,
    }
    .ok_or_else(|| field("likes", format!("`{}` is not a non-negative integer", raw.likes)))?;
    Ok(Comment {
        id,
        timestamp,
        user: raw.user.trim().to_string(),
        text: raw.text,
        label,
        likes,
    })
}

/// ISO-8601 with an explicit offset, or a naive local datetime interpreted
/// in `tz`.
pub fn parse_timestamp(s: &str, tz: Tz) -> std::result::Result<DateTime<Utc>, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    for fmt in NAIVE {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return tz
                .from_local_datetime(&naive)
                .earliest()
                .map(|dt| dt.with_timezone(&Utc))
                .ok_or_else(|| format!("`{s}` does not exist in {tz}"));
        }
    }
    Err(format!("`{s}` is not an ISO-8601 timestamp"))
}

/// Writes the corpus in the comments CSV schema with UTC timestamps.
pub fn write_comments_csv<W: Write>(corpus: &CommentCorpus, writer: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "timestamp", "user", "text", "label", "likes"])?;
    for c in &corpus.comments {
        wtr.write_record([
            c.id.as_str(),
            &c.timestamp.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            &c.user,
            &c.text,
            label_str(c.label),
            &c.likes.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketBar {
    pub date: NaiveDate,
    pub close: f64,
}

pub fn load_market(path: &Path) -> Result<Vec<MarketBar>> {
    let file = File::open(path).map_err(io_err(path))?;
    read_market_csv(file)
}

pub fn read_market_csv<R: Read>(reader: R) -> Result<Vec<MarketBar>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Malformed {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "close"] {
        return Err(IngestError::Malformed {
            row: 0,
            reason: "header must be `date,close`".into(),
        });
    }
    let mut bars = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| IngestError::Malformed {
            row,
            reason: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(record.get(0).unwrap_or("").trim(), "%Y-%m-%d")
            .map_err(|e| IngestError::Field {
                row,
                field: "date",
                reason: e.to_string(),
            })?;
        let close: f64 = record
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e: std::num::ParseFloatError| IngestError::Field {
                row,
                field: "close",
                reason: e.to_string(),
            })?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(IngestError::NonPositiveClose { row, date, close });
        }
        bars.push(MarketBar { date, close });
    }
    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(IngestError::DuplicateDate(w[0].date));
    }
    Ok(bars)
}

pub fn write_market_csv<W: Write>(bars: &[MarketBar], writer: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "close"])?;
    for b in bars {
        wtr.write_record([b.date.to_string(), b.close.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Comments grouped by the trading date they are attributed to.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyBuckets {
    pub stock_symbol: String,
    pub calendar: Vec<NaiveDate>,
    /// One entry per calendar date, possibly empty.
    pub buckets: BTreeMap<NaiveDate, Vec<Comment>>,
}

impl DailyBuckets {
    pub fn get(&self, date: NaiveDate) -> &[Comment] {
        self.buckets.get(&date).map_or(&[], Vec::as_slice)
    }

    pub fn total(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    /// Iterates days in calendar order.
    pub fn days(&self) -> impl Iterator<Item = (NaiveDate, &[Comment])> {
        self.calendar.iter().map(move |&d| (d, self.get(d)))
    }

    /// Trading date each comment id was assigned to.
    pub fn assignments(&self) -> BTreeMap<&str, NaiveDate> {
        self.buckets
            .iter()
            .flat_map(|(d, cs)| cs.iter().map(move |c| (c.id.as_str(), *d)))
            .collect()
    }
}

/// Assigns each comment to a trading date. A comment posted on a trading
/// date at or before `cutoff` (local time in `tz`) belongs to that date;
/// anything later, or on a non-trading day, rolls forward to the next
/// trading date. Comments before the first trading date roll forward too.
pub fn bucket_by_trading_day(
    corpus: &CommentCorpus,
    bars: &[MarketBar],
    cutoff: NaiveTime,
    tz: Tz,
) -> Result<DailyBuckets> {
    if bars.is_empty() {
        return Err(IngestError::EmptyMarket);
    }
    let calendar: Vec<NaiveDate> = bars.iter().map(|b| b.date).collect();
    let mut buckets: BTreeMap<NaiveDate, Vec<Comment>> =
        calendar.iter().map(|&d| (d, Vec::new())).collect();
    let mut orphans = Vec::new();
    for c in &corpus.comments {
        match assign_trading_day(c.timestamp, &calendar, cutoff, tz) {
            Some(d) => buckets.entry(d).or_default().push(c.clone()),
            None => orphans.push(c.id.clone()),
        }
    }
    if !orphans.is_empty() {
        return Err(IngestError::Orphaned(orphans));
    }
    Ok(DailyBuckets {
        stock_symbol: corpus.stock_symbol.clone(),
        calendar,
        buckets,
    })
}

/// The trading date a timestamp is attributed to, if any.
pub fn assign_trading_day(
    ts: DateTime<Utc>,
    calendar: &[NaiveDate],
    cutoff: NaiveTime,
    tz: Tz,
) -> Option<NaiveDate> {
    let local = ts.with_timezone(&tz);
    let (date, time) = (local.date_naive(), local.time());
    let first_on_or_after = calendar.partition_point(|d| *d < date);
    let idx = match calendar.get(first_on_or_after) {
        Some(&d) if d == date && time <= cutoff => first_on_or_after,
        Some(&d) if d == date => first_on_or_after + 1,
        _ => first_on_or_after,
    };
    calendar.get(idx).copied()
}
