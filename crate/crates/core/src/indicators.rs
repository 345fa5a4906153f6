//! User trust coefficients, the four daily bullishness indices and the
//! comment-volume features.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{Comment, DailyBuckets, MarketBar, Sentiment};

pub const DEFAULT_TC: f64 = 0.5;
pub const NEUTRAL_INDEX: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum IndicatorError {
    #[error("no close for {0}")]
    MissingClose(NaiveDate),
    #[error("no trading day after {0}; its comments cannot be scored for correctness")]
    MissingNextClose(NaiveDate),
    #[error("comment {0} is unlabeled")]
    Unlabeled(String),
    #[error("trust window {0}..={1} contains no labeled comments")]
    EmptyWindow(NaiveDate, NaiveDate),
    #[error("comment {0} has no polarity score")]
    MissingScore(String),
    #[error("unknown missing-index policy {0:?} (expected neutral, carry_forward or leave_missing)")]
    Policy(String),
}

pub type Result<T, E = IndicatorError> = std::result::Result<T, E>;

/// Whether a call was right about the next close. An unchanged close is
/// wrong for both classes.
pub fn direction_correct(label: Sentiment, close: f64, next_close: f64) -> bool {
    match label {
        Sentiment::Bullish => next_close > close,
        Sentiment::Bearish => next_close < close,
    }
}

fn close_and_next(date: NaiveDate, bars: &[MarketBar]) -> Result<(f64, f64)> {
    let i = bars
        .binary_search_by_key(&date, |b| b.date)
        .map_err(|_| IndicatorError::MissingClose(date))?;
    let next = bars.get(i + 1).ok_or(IndicatorError::MissingNextClose(date))?;
    Ok((bars[i].close, next.close))
}

/// Correctness of a comment attributed to trading date `date`.
pub fn comment_correct(comment: &Comment, date: NaiveDate, bars: &[MarketBar]) -> Result<bool> {
    let label = comment.label.ok_or_else(|| IndicatorError::Unlabeled(comment.id.clone()))?;
    let (close, next) = close_and_next(date, bars)?;
    Ok(direction_correct(label, close, next))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserActivity {
    pub comments: u64,
    pub active_days: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustTable {
    pub stock_symbol: String,
    /// Computed coefficients of users above the activity threshold.
    pub coefficients: BTreeMap<String, f64>,
    pub activity: BTreeMap<String, UserActivity>,
    pub default_tc: f64,
    pub window: (NaiveDate, NaiveDate),
    /// Mean labeled-comment count per user in the window.
    pub avg_comment_count: f64,
}

impl TrustTable {
    pub fn tc(&self, user: &str) -> f64 {
        self.coefficients.get(user).copied().unwrap_or(self.default_tc)
    }

    /// Every user gets the same coefficient.
    pub fn uniform(stock_symbol: &str, tc: f64) -> Self {
        Self {
            stock_symbol: stock_symbol.into(),
            coefficients: BTreeMap::new(),
            activity: BTreeMap::new(),
            default_tc: tc,
            window: (NaiveDate::MIN, NaiveDate::MIN),
            avg_comment_count: 0.0,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "user,comments,active_days,qualified,tc")?;
        for (user, a) in &self.activity {
            let q = self.coefficients.contains_key(user);
            writeln!(w, "{},{},{},{},{}", csv_field(user), a.comments, a.active_days, q, self.tc(user))?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Trust coefficient of each user over the trading dates in `window`
/// (inclusive): the mean over the user's active days of
/// (user accuracy) / (crowd accuracy). Days on which the crowd was never
/// right are skipped. Users with no more labeled comments than the
/// per-user average get `default_tc`. Unlabeled comments are ignored.
pub fn compute_trust(
    buckets: &DailyBuckets,
    bars: &[MarketBar],
    window: (NaiveDate, NaiveDate),
    default_tc: f64,
) -> Result<TrustTable> {
    struct Day {
        crowd_ratio: Option<f64>,
        users: BTreeMap<String, (u64, u64)>,
    }
    let mut days = Vec::new();
    for (date, comments) in buckets.days().filter(|(d, _)| *d >= window.0 && *d <= window.1) {
        let labeled: Vec<&Comment> = comments.iter().filter(|c| c.label.is_some()).collect();
        if labeled.is_empty() {
            continue;
        }
        let (close, next) = close_and_next(date, bars)?;
        let mut users: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        let (mut correct, mut total) = (0u64, 0u64);
        for c in labeled {
            let ok = direction_correct(c.label.expect("filtered"), close, next);
            let e = users.entry(c.user.clone()).or_default();
            e.0 += u64::from(ok);
            e.1 += 1;
            correct += u64::from(ok);
            total += 1;
        }
        let crowd_ratio = (correct > 0).then(|| total as f64 / correct as f64);
        days.push(Day { crowd_ratio, users });
    }
    if days.is_empty() {
        return Err(IndicatorError::EmptyWindow(window.0, window.1));
    }

    let mut activity: BTreeMap<String, UserActivity> = BTreeMap::new();
    for day in &days {
        for (user, &(_, total)) in &day.users {
            let a = activity.entry(user.clone()).or_insert(UserActivity {
                comments: 0,
                active_days: 0,
            });
            a.comments += total;
            a.active_days += 1;
        }
    }
    let total: u64 = activity.values().map(|a| a.comments).sum();
    let avg_comment_count = total as f64 / activity.len() as f64;

    let mut sums: BTreeMap<&str, (f64, u64)> = BTreeMap::new();
    for day in &days {
        let Some(crowd) = day.crowd_ratio else { continue };
        for (user, &(correct, total)) in &day.users {
            let e = sums.entry(user.as_str()).or_default();
            e.0 += correct as f64 / total as f64 * crowd;
            e.1 += 1;
        }
    }
    let coefficients = activity
        .iter()
        .filter(|(_, a)| a.comments as f64 > avg_comment_count)
        .filter_map(|(user, _)| {
            let &(sum, n) = sums.get(user.as_str())?;
            Some((user.clone(), sum / n as f64))
        })
        .collect();
    Ok(TrustTable {
        stock_symbol: buckets.stock_symbol.clone(),
        coefficients,
        activity,
        default_tc,
        window,
        avg_comment_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// 0.5, the no-information value.
    #[default]
    Neutral,
    /// The previous day's value; 0.5 before the first defined day.
    CarryForward,
    LeaveMissing,
}

impl std::str::FromStr for MissingPolicy {
    type Err = IndicatorError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(Self::Neutral),
            "carry_forward" | "carry-forward" => Ok(Self::CarryForward),
            "leave_missing" | "leave-missing" => Ok(Self::LeaveMissing),
            _ => Err(IndicatorError::Policy(s.into())),
        }
    }
}

impl MissingPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Neutral => "neutral",
            Self::CarryForward => "carry_forward",
            Self::LeaveMissing => "leave_missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyIndicatorRow {
    pub date: NaiveDate,
    /// index1..index4.
    pub indices: [Option<f64>; 4],
    pub comment_count: u64,
    pub count_with_likes: u64,
    pub bullish_count: u64,
    pub bearish_count: u64,
    /// Some index was undefined and filled (or left empty) by the policy.
    pub missing: bool,
}

fn share(bull: f64, bear: f64) -> Option<f64> {
    let total = bull + bear;
    (total > 0.0).then(|| bull / total)
}

/// Raw indices of one day's comments; `None` where a ratio is 0/0.
pub fn day_indices(
    comments: &[Comment],
    scores: &HashMap<String, f64>,
    trust: &TrustTable,
) -> Result<[Option<f64>; 4]> {
    let mut classified = Vec::with_capacity(comments.len());
    for c in comments {
        let Some(label) = c.label else { continue };
        let s = scores
            .get(&c.id)
            .ok_or_else(|| IndicatorError::MissingScore(c.id.clone()))?
            .abs();
        classified.push((usize::from(label == Sentiment::Bearish), s, trust.tc(&c.user)));
    }
    // Ratios are scale-free; dividing by the day's largest coefficient makes
    // equal coefficients exactly 1 so the weighted indices reduce exactly.
    let t_max = classified.iter().map(|x| x.2).fold(0.0, f64::max);
    let mut count = [0.0; 2];
    let mut tc = [0.0; 2];
    let mut mag = [0.0; 2];
    let mut mag_tc = [0.0; 2];
    for (k, s, t) in classified {
        let w = if t_max > 0.0 { t / t_max } else { 0.0 };
        count[k] += 1.0;
        tc[k] += w;
        mag[k] += s;
        mag_tc[k] += s * w;
    }
    Ok([
        share(count[0], count[1]),
        share(tc[0], tc[1]),
        share(mag[0], mag[1]),
        share(mag_tc[0], mag_tc[1]),
    ])
}

/// One row per calendar day. Comments count as classified when their
/// `label` is set; `scores` maps comment id to its polarity score.
pub fn compute_daily_indices(
    buckets: &DailyBuckets,
    scores: &HashMap<String, f64>,
    trust: &TrustTable,
    policy: MissingPolicy,
) -> Result<Vec<DailyIndicatorRow>> {
    let mut rows = Vec::with_capacity(buckets.calendar.len());
    let mut last = [NEUTRAL_INDEX; 4];
    for (date, comments) in buckets.days() {
        let raw = day_indices(comments, scores, trust)?;
        let mut indices = raw;
        for (k, v) in indices.iter_mut().enumerate() {
            match v {
                Some(x) => last[k] = *x,
                None => {
                    *v = match policy {
                        MissingPolicy::Neutral => Some(NEUTRAL_INDEX),
                        MissingPolicy::CarryForward => Some(last[k]),
                        MissingPolicy::LeaveMissing => None,
                    }
                }
            }
        }
        let count = |s| comments.iter().filter(|c| c.label == Some(s)).count() as u64;
        rows.push(DailyIndicatorRow {
            date,
            indices,
            comment_count: comments.len() as u64,
            count_with_likes: comments.len() as u64 + comments.iter().map(|c| c.likes).sum::<u64>(),
            bullish_count: count(Sentiment::Bullish),
            bearish_count: count(Sentiment::Bearish),
            missing: raw.iter().any(Option::is_none),
        });
    }
    Ok(rows)
}

pub const INDICATOR_HEADER: &str =
    "date,index1,index2,index3,index4,count,count_with_likes,bullish,bearish,missing_flag";

pub fn write_indicators_csv<W: Write>(rows: &[DailyIndicatorRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{INDICATOR_HEADER}")?;
    for r in rows {
        let idx: Vec<String> = r.indices.iter().map(|v| v.map_or(String::new(), |x| x.to_string())).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.date,
            idx.join(","),
            r.comment_count,
            r.count_with_likes,
            r.bullish_count,
            r.bearish_count,
            u8::from(r.missing),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use Sentiment::{Bearish, Bullish};

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, day).unwrap()
    }

    fn comment(id: &str, user: &str, label: Option<Sentiment>, likes: u64) -> Comment {
        Comment {
            id: id.into(),
            timestamp: Utc.with_ymd_and_hms(2020, 1, 1, 8, 0, 0).unwrap(),
            user: user.into(),
            text: String::new(),
            label,
            likes,
        }
    }

    fn buckets(days: Vec<(NaiveDate, Vec<Comment>)>) -> DailyBuckets {
        DailyBuckets {
            stock_symbol: "TEST".into(),
            calendar: days.iter().map(|x| x.0).collect(),
            buckets: days.into_iter().collect(),
        }
    }

    fn bars(closes: &[(u32, f64)]) -> Vec<MarketBar> {
        closes.iter().map(|&(day, close)| MarketBar { date: d(day), close }).collect()
    }

    #[test]
    fn correctness_rules() {
        let b = bars(&[(1, 100.0), (2, 102.0), (3, 102.0)]);
        let bull = comment("a", "u", Some(Bullish), 0);
        let bear = comment("b", "u", Some(Bearish), 0);
        assert!(comment_correct(&bull, d(1), &b).unwrap());
        assert!(!comment_correct(&bear, d(1), &b).unwrap());
        assert!(!comment_correct(&bull, d(2), &b).unwrap());
        assert!(!comment_correct(&bear, d(2), &b).unwrap());
        assert!(matches!(comment_correct(&bull, d(3), &b), Err(IndicatorError::MissingNextClose(_))));
        assert!(matches!(
            comment_correct(&comment("c", "u", None, 0), d(1), &b),
            Err(IndicatorError::Unlabeled(_))
        ));
    }

    #[test]
    fn trust_worked_scenarios() {
        // Two up days. Each day: expert says bullish twice (right), the crowd
        // is 50% right overall.
        let b = bars(&[(1, 100.0), (2, 101.0), (3, 102.0)]);
        let mut days = Vec::new();
        for day in 1..=2 {
            let mut cs = vec![
                comment(&format!("e{day}a"), "expert", Some(Bullish), 0),
                comment(&format!("e{day}b"), "expert", Some(Bullish), 0),
                comment(&format!("m{day}a"), "median", Some(Bullish), 0),
                comment(&format!("m{day}b"), "median", Some(Bearish), 0),
            ];
            for k in 0..4 {
                cs.push(comment(&format!("w{day}{k}"), "wrong", Some(Bearish), 0));
            }
            cs.push(comment(&format!("r{day}a"), "rare", Some(Bullish), 0));
            cs.push(comment(&format!("r{day}b"), "rare", Some(Bullish), 0));
            cs.push(comment(&format!("r{day}c"), "rare", Some(Bullish), 0));
            days.push((d(day), cs));
        }
        days.push((d(3), vec![comment("late", "once", Some(Bullish), 0)]));
        let bk = buckets(days);
        let t = compute_trust(&bk, &b, (d(1), d(2)), DEFAULT_TC).unwrap();
        // Per day 6 of 11 comments are right.
        let crowd = 11.0 / 6.0;
        // Average is 22/4 = 5.5; expert (4) and median (4) fall below it.
        assert_eq!(t.avg_comment_count, 5.5);
        assert_eq!(t.tc("expert"), DEFAULT_TC);
        assert_eq!(t.tc("wrong"), 0.0);
        assert_eq!(t.tc("rare"), crowd);
        assert_eq!(t.tc("once"), DEFAULT_TC);
    }

    #[test]
    fn perfect_user_against_half_right_crowd() {
        // Day 1 up, day 2 down. Crowd is 50% right each day; "ace" is always
        // right and comments more than the average user.
        let b = bars(&[(1, 100.0), (2, 110.0), (3, 99.0)]);
        let day = |n: u32, good: Sentiment| {
            let mut cs: Vec<Comment> =
                (0..3).map(|k| comment(&format!("a{n}{k}"), "ace", Some(good), 0)).collect();
            cs.extend((0..3).map(|k| comment(&format!("x{n}{k}"), &format!("x{k}"), Some(good.opposite()), 0)));
            (d(n), cs)
        };
        let bk = buckets(vec![day(1, Bullish), day(2, Bearish)]);
        let t = compute_trust(&bk, &b, (d(1), d(2)), DEFAULT_TC).unwrap();
        assert_eq!(t.tc("ace"), 2.0);
        assert_eq!(t.tc("x0"), DEFAULT_TC);
    }

    #[test]
    fn crowd_matching_user_is_one() {
        let b = bars(&[(1, 100.0), (2, 110.0), (3, 120.0)]);
        let mut cs = Vec::new();
        for k in 0..4 {
            cs.push(comment(&format!("m{k}"), "match", Some(if k % 2 == 0 { Bullish } else { Bearish }), 0));
        }
        cs.push(comment("o1", "other", Some(Bullish), 0));
        cs.push(comment("o2", "other2", Some(Bearish), 0));
        let bk = buckets(vec![(d(1), cs.clone()), (d(2), cs.iter().map(|c| Comment { id: format!("{}'", c.id), ..c.clone() }).collect())]);
        let t = compute_trust(&bk, &b, (d(1), d(2)), DEFAULT_TC).unwrap();
        assert_eq!(t.tc("match"), 1.0);
    }

    #[test]
    fn crowd_never_right_day_is_skipped() {
        let b = bars(&[(1, 100.0), (2, 100.0), (3, 101.0)]);
        let mk = |day: u32| {
            vec![
                comment(&format!("a{day}1"), "a", Some(Bullish), 0),
                comment(&format!("a{day}2"), "a", Some(Bullish), 0),
                comment(&format!("b{day}"), "b", Some(Bearish), 0),
            ]
        };
        let bk = buckets(vec![(d(1), mk(1)), (d(2), mk(2))]);
        let t = compute_trust(&bk, &b, (d(1), d(2)), DEFAULT_TC).unwrap();
        // Day 1 is flat: nobody right, skipped. Day 2: crowd 2/3 right, a all right.
        assert_eq!(t.tc("a"), 1.5);
    }

    #[test]
    fn empty_window_rejected() {
        let b = bars(&[(1, 100.0), (2, 101.0)]);
        let bk = buckets(vec![(d(1), vec![comment("x", "u", None, 0)]), (d(2), vec![])]);
        assert!(matches!(compute_trust(&bk, &b, (d(1), d(2)), 0.5), Err(IndicatorError::EmptyWindow(..))));
    }

    fn scores_of(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn index_arithmetic() {
        let cs = vec![
            comment("1", "u1", Some(Bullish), 2),
            comment("2", "u2", Some(Bullish), 0),
            comment("3", "u3", Some(Bearish), 5),
            comment("4", "u4", Some(Bullish), 0),
            comment("5", "u5", None, 1),
        ];
        let scores = scores_of(&[("1", 1.0), ("2", 3.0), ("3", -1.0), ("4", 0.0), ("5", 0.2)]);
        let bk = buckets(vec![(d(1), cs)]);
        let rows = compute_daily_indices(&bk, &scores, &TrustTable::uniform("TEST", 1.0), MissingPolicy::Neutral).unwrap();
        let r = &rows[0];
        assert_eq!(r.indices[0], Some(0.75));
        assert_eq!(r.indices[2], Some(0.8));
        assert_eq!(r.indices[1], r.indices[0]);
        assert_eq!(r.indices[3], r.indices[2]);
        assert_eq!((r.comment_count, r.count_with_likes, r.bullish_count, r.bearish_count), (5, 13, 3, 1));
        assert!(!r.missing);
    }

    #[test]
    fn trust_weights_shift_index2() {
        let cs = vec![comment("1", "good", Some(Bullish), 0), comment("2", "bad", Some(Bearish), 0)];
        let mut t = TrustTable::uniform("TEST", 0.5);
        t.coefficients.insert("good".into(), 1.5);
        let bk = buckets(vec![(d(1), cs)]);
        let scores = scores_of(&[("1", 2.0), ("2", -2.0)]);
        let r = &compute_daily_indices(&bk, &scores, &t, MissingPolicy::Neutral).unwrap()[0];
        assert_eq!(r.indices[0], Some(0.5));
        assert_eq!(r.indices[1], Some(0.75));
        assert_eq!(r.indices[3], Some(0.75));
    }

    #[test]
    fn missing_policies() {
        let bk = buckets(vec![
            (d(1), vec![comment("1", "u", Some(Bullish), 0)]),
            (d(2), vec![]),
            (d(3), vec![comment("3", "u", None, 4)]),
        ]);
        let scores = scores_of(&[("1", 1.0), ("3", 1.0)]);
        let t = TrustTable::uniform("TEST", 1.0);
        let neutral = compute_daily_indices(&bk, &scores, &t, MissingPolicy::Neutral).unwrap();
        assert_eq!(neutral[1].indices, [Some(0.5); 4]);
        assert!(neutral[1].missing && neutral[2].missing && !neutral[0].missing);
        assert_eq!(neutral[2].count_with_likes, 5);
        let carry = compute_daily_indices(&bk, &scores, &t, MissingPolicy::CarryForward).unwrap();
        assert_eq!(carry[2].indices, [Some(1.0); 4]);
        let leave = compute_daily_indices(&bk, &scores, &t, MissingPolicy::LeaveMissing).unwrap();
        assert_eq!(leave[1].indices, [None; 4]);
        let mut out = Vec::new();
        write_indicators_csv(&leave, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), INDICATOR_HEADER);
        assert_eq!(text.lines().nth(2).unwrap(), "2020-01-02,,,,,0,0,0,0,1");
    }

    #[test]
    fn missing_score_is_an_error() {
        let bk = buckets(vec![(d(1), vec![comment("1", "u", Some(Bullish), 0)])]);
        let r = compute_daily_indices(&bk, &HashMap::new(), &TrustTable::uniform("T", 1.0), MissingPolicy::Neutral);
        assert!(matches!(r, Err(IndicatorError::MissingScore(_))));
    }

    fn arb_day() -> impl Strategy<Value = Vec<(u8, Option<bool>, u64, f64)>> {
        proptest::collection::vec((0u8..6, proptest::option::of(any::<bool>()), 0u64..20, -3.0f64..3.0), 0..12)
    }

    proptest! {
        #[test]
        fn equal_trust_identities(days in proptest::collection::vec(arb_day(), 1..6), tc in 0.01f64..5.0) {
            let mut scores = HashMap::new();
            let mut cal = Vec::new();
            for (i, day) in days.iter().enumerate() {
                let cs: Vec<Comment> = day.iter().enumerate().map(|(j, &(u, lab, likes, s))| {
                    let id = format!("{i}-{j}");
                    scores.insert(id.clone(), s);
                    comment(&id, &format!("u{u}"), lab.map(|b| if b { Bullish } else { Bearish }), likes)
                }).collect();
                cal.push((d(i as u32 + 1), cs));
            }
            let bk = buckets(cal);
            let mut t = TrustTable::uniform("T", tc);
            // Explicit coefficients equal to the default are the same thing.
            t.coefficients.insert("u0".into(), tc);
            for policy in [MissingPolicy::Neutral, MissingPolicy::CarryForward, MissingPolicy::LeaveMissing] {
                let rows = compute_daily_indices(&bk, &scores, &t, policy).unwrap();
                for r in &rows {
                    prop_assert_eq!(r.indices[1], r.indices[0]);
                    prop_assert_eq!(r.indices[3], r.indices[2]);
                    for x in r.indices.iter().flatten() {
                        prop_assert!((0.0..=1.0).contains(x));
                    }
                    prop_assert!(r.count_with_likes >= r.comment_count);
                    prop_assert!(r.bullish_count + r.bearish_count <= r.comment_count);
                    let day = &bk.buckets[&r.date];
                    prop_assert_eq!(r.count_with_likes, day.len() as u64 + day.iter().map(|c| c.likes).sum::<u64>());
                    if r.bullish_count > 0 && r.bearish_count == 0 {
                        prop_assert_eq!(r.indices[0], Some(1.0));
                        prop_assert_eq!(r.indices[1], Some(1.0));
                    }
                    if r.bearish_count > 0 && r.bullish_count == 0 {
                        prop_assert_eq!(r.indices[0], Some(0.0));
                    }
                }
            }
        }

        #[test]
        fn indices_bounded_under_any_trust(days in proptest::collection::vec(arb_day(), 1..6), tcs in proptest::collection::vec(0.0f64..4.0, 6)) {
            let mut scores = HashMap::new();
            let mut cal = Vec::new();
            for (i, day) in days.iter().enumerate() {
                let cs: Vec<Comment> = day.iter().enumerate().map(|(j, &(u, lab, likes, s))| {
                    let id = format!("{i}-{j}");
                    scores.insert(id.clone(), s);
                    comment(&id, &format!("u{u}"), lab.map(|b| if b { Bullish } else { Bearish }), likes)
                }).collect();
                cal.push((d(i as u32 + 1), cs));
            }
            let bk = buckets(cal);
            let mut t = TrustTable::uniform("T", 0.5);
            for (u, tc) in tcs.iter().enumerate() {
                t.coefficients.insert(format!("u{u}"), *tc);
            }
            for r in compute_daily_indices(&bk, &scores, &t, MissingPolicy::LeaveMissing).unwrap() {
                for x in r.indices.iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(x));
                }
            }
        }
    }
}
