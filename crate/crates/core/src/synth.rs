//! Synthetic forum corpora and price paths with known structure.

use chrono::{Datelike, Days, NaiveDate, NaiveTime, TimeZone, Utc, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson, WeightedIndex, Zipf};
use serde::{Deserialize, Serialize};

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::ingest::{write_comments_csv, write_market_csv, Comment, CommentCorpus, MarketBar, Sentiment, DEFAULT_TIMEZONE};
use crate::rng::stream_rng;

/// Saturday through Wednesday.
pub fn is_trading_day(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Thu | Weekday::Fri)
}

/// The first `n` trading dates on or after `start`.
pub fn trading_calendar(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if is_trading_day(d) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

const LETTERS: [char; 14] = ['ب', 'پ', 'ت', 'ج', 'د', 'ر', 'ز', 'س', 'ش', 'ف', 'ک', 'گ', 'ل', 'م'];

/// The i-th of 2744 distinct made-up Persian-script words that pass through
/// preprocessing unchanged.
pub fn pseudo_word(i: usize) -> String {
    let n = LETTERS.len();
    let (a, b, c) = (i % n, (i / n) % n, (i / (n * n)) % n);
    [LETTERS[a], 'ا', LETTERS[b], LETTERS[c]].iter().collect()
}

const BULLISH_WORDS: [&str; 10] = ["صعود", "رشد", "سبز", "عالی", "سود", "مثبت", "بخرید", "خوب", "قوی", "حمایت"];
const BEARISH_WORDS: [&str; 10] = ["ریزش", "نزول", "قرمز", "ضرر", "منفی", "بفروشید", "بد", "ضعیف", "مقاومت", "افت"];

/// Class-conditional bag-of-words generator.
#[derive(Debug, Clone)]
pub struct TextModel {
    words: Vec<String>,
    bullish: WeightedIndex<f64>,
    bearish: WeightedIndex<f64>,
    min_words: usize,
    max_words: usize,
}

impl TextModel {
    /// Draws words with probability proportional to the given class weights.
    pub fn new(words: Vec<String>, bullish: &[f64], bearish: &[f64], min_words: usize, max_words: usize) -> Self {
        assert!(min_words >= 1 && min_words <= max_words);
        Self {
            bullish: WeightedIndex::new(bullish).expect("valid weights"),
            bearish: WeightedIndex::new(bearish).expect("valid weights"),
            words,
            min_words,
            max_words,
        }
    }

    /// Strong marker words per class over a neutral background: each word is a
    /// class marker with probability 0.3, mostly from its own class.
    pub fn planted() -> Self {
        let mut words: Vec<String> = BULLISH_WORDS.iter().chain(&BEARISH_WORDS).map(|w| w.to_string()).collect();
        let n_polar = words.len();
        words.extend((0..150).map(pseudo_word));
        let weights = |own: std::ops::Range<usize>| -> Vec<f64> {
            (0..words.len())
                .map(|i| {
                    if own.contains(&i) {
                        0.27 / 10.0
                    } else if i < n_polar {
                        0.03 / 10.0
                    } else {
                        0.7 / 150.0
                    }
                })
                .collect()
        };
        let bull = weights(0..10);
        let bear = weights(10..20);
        Self::new(words, &bull, &bear, 5, 10)
    }

    /// Many weakly tilted words: no single word separates the classes, their
    /// aggregate does.
    pub fn diffuse() -> Self {
        let n = 600;
        let words: Vec<String> = (0..n).map(|i| pseudo_word(i + 200)).collect();
        let bull: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.62 } else { 0.38 }).collect();
        let bear: Vec<f64> = bull.iter().map(|w| 1.0 - w).collect();
        Self::new(words, &bull, &bear, 6, 12)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, class: Sentiment) -> String {
        let len = rng.gen_range(self.min_words..=self.max_words);
        let dist = match class {
            Sentiment::Bullish => &self.bullish,
            Sentiment::Bearish => &self.bearish,
        };
        (0..len).map(|_| self.words[dist.sample(rng)].as_str()).collect::<Vec<_>>().join(" ")
    }
}

fn timestamp_on<R: Rng>(rng: &mut R, date: NaiveDate) -> chrono::DateTime<Utc> {
    // 08:00–12:00 Tehran time, inside the session of `date`.
    let secs = rng.gen_range(8 * 3600..12 * 3600);
    let local = date.and_time(NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("valid time"));
    DEFAULT_TIMEZONE
        .from_local_datetime(&local)
        .earliest()
        .expect("no DST gap in the morning")
        .with_timezone(&Utc)
}

/// A balanced, fully labeled corpus.
pub fn labeled_corpus(text: &TextModel, n: usize, seed: u64) -> CommentCorpus {
    let mut rng = stream_rng(seed, 0);
    let days = trading_calendar(NaiveDate::from_ymd_opt(2020, 1, 4).expect("valid date"), n / 20 + 1);
    let comments = (0..n)
        .map(|i| {
            let class = if i % 2 == 0 { Sentiment::Bullish } else { Sentiment::Bearish };
            Comment {
                id: format!("c{i:05}"),
                timestamp: timestamp_on(&mut rng, days[i / 20]),
                user: format!("u{:03}", rng.gen_range(0..100)),
                text: text.sample(&mut rng, class),
                label: Some(class),
                likes: 0,
            }
        })
        .collect();
    CommentCorpus::new("SYN", comments).expect("unique ids")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StockParams {
    pub n_days: usize,
    pub start: NaiveDate,
    pub mean_comments: f64,
    /// AR(1) coefficient of the daily log comment intensity.
    pub volume_persistence: f64,
    pub mean_likes: f64,
    pub n_users: u64,
    pub labeled_fraction: f64,
    pub bullish_share: f64,
    /// return_t = phi·return_{t−1} + beta·z(countWithLikes_{t−1}) + noise_sd·ε_t
    pub phi: f64,
    pub beta: f64,
    pub noise_sd: f64,
    pub initial_close: f64,
}

impl Default for StockParams {
    fn default() -> Self {
        Self {
            n_days: 500,
            start: NaiveDate::from_ymd_opt(2019, 3, 23).expect("valid date"),
            mean_comments: 12.0,
            volume_persistence: 0.5,
            mean_likes: 2.0,
            n_users: 150,
            labeled_fraction: 0.3,
            bullish_share: 0.55,
            phi: 0.3,
            beta: 0.025,
            noise_sd: 0.005,
            initial_close: 10_000.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticStock {
    pub corpus: CommentCorpus,
    pub bars: Vec<MarketBar>,
    /// Comment count plus likes per trading day, as generated.
    pub count_with_likes: Vec<u64>,
    pub returns: Vec<f64>,
}

/// One stock: comment volumes with persistent intensity and day-level like
/// rates, texts from `text`, and a price path whose return loads on the
/// previous day's standardized count-with-likes.
pub fn synthetic_stock(symbol: &str, params: &StockParams, text: &TextModel, seed: u64) -> SyntheticStock {
    let mut vol_rng = stream_rng(seed, 1);
    let mut text_rng = stream_rng(seed, 2);
    let mut price_rng = stream_rng(seed, 3);
    let calendar = trading_calendar(params.start, params.n_days);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let users = Zipf::new(params.n_users, 1.1).expect("valid zipf");

    let mut log_intensity = 0.0;
    let mut comments = Vec::new();
    let mut cwl = Vec::with_capacity(calendar.len());
    for (d, &date) in calendar.iter().enumerate() {
        log_intensity = params.volume_persistence * log_intensity + 0.4 * std_normal.sample(&mut vol_rng);
        let lambda = params.mean_comments * f64::exp(log_intensity);
        let n = Poisson::new(lambda).map_or(0, |p| p.sample(&mut vol_rng) as u64);
        let like_rate = params.mean_likes * f64::exp(0.8 * std_normal.sample(&mut vol_rng));
        let likes = Geometric::new(1.0 / (1.0 + like_rate)).expect("valid geometric");
        let mut day_total = 0;
        for j in 0..n {
            let class = if text_rng.gen_bool(params.bullish_share) {
                Sentiment::Bullish
            } else {
                Sentiment::Bearish
            };
            let l = likes.sample(&mut vol_rng);
            day_total += 1 + l;
            comments.push(Comment {
                id: format!("{symbol}-{d:04}-{j:03}"),
                timestamp: timestamp_on(&mut text_rng, date),
                user: format!("user{:03}", users.sample(&mut text_rng) as u64),
                text: text.sample(&mut text_rng, class),
                label: text_rng.gen_bool(params.labeled_fraction).then_some(class),
                likes: l,
            });
        }
        cwl.push(day_total);
    }

    let m = cwl.iter().sum::<u64>() as f64 / cwl.len() as f64;
    let sd = (cwl.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / cwl.len() as f64).sqrt();
    let z = |v: u64| if sd > 0.0 { (v as f64 - m) / sd } else { 0.0 };
    let mut returns = vec![0.0; calendar.len()];
    let mut close = vec![params.initial_close; calendar.len()];
    for t in 1..calendar.len() {
        let r = params.phi * returns[t - 1] + params.beta * z(cwl[t - 1]) + params.noise_sd * std_normal.sample(&mut price_rng);
        returns[t] = r.max(-0.5);
        close[t] = close[t - 1] * (1.0 + returns[t]);
    }
    SyntheticStock {
        corpus: CommentCorpus::new(symbol, comments).expect("unique ids"),
        bars: calendar.iter().zip(&close).map(|(&date, &close)| MarketBar { date, close }).collect(),
        count_with_likes: cwl,
        returns,
    }
}

impl SyntheticStock {
    /// Writes `{symbol}.csv` and `{symbol}_market.csv` into `dir`.
    pub fn write_inputs(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        let comments = dir.join(format!("{}.csv", self.corpus.stock_symbol));
        let market = dir.join(format!("{}_market.csv", self.corpus.stock_symbol));
        write_comments_csv(&self.corpus, File::create(&comments)?).map_err(std::io::Error::other)?;
        write_market_csv(&self.bars, File::create(&market)?).map_err(std::io::Error::other)?;
        Ok((comments, market))
    }
}
