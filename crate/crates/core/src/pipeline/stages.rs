use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{artifact, Pipeline, PipelineError, Result, Target};
use crate::classifier::{
    comment_score, cross_validate, featurize, train, ClassifierConfig, Dataset, FeatureSchema, TrainedClassifier,
    TreeParams,
};
use crate::econometrics::{
    acf, build_m1, ccf, close_series, daily_return, evaluate as evaluate_model, fit_m0, screen_candidates, train_len,
    align, EconError, EvalReport, RegressionModel, SelectionParams, Series,
};
use crate::indicators::{compute_daily_indices, compute_trust, write_indicators_csv, TrustTable, UserActivity};
use crate::ingest::{
    bucket_by_trading_day, load_comments, load_market, read_comments_csv, read_market_csv, write_comments_csv,
    write_market_csv, CommentCorpus, DailyBuckets, MarketBar, Sentiment,
};
use crate::lexicon::{build_lexicon, count_contingency, load_lexicon, save_lexicon, LexiconParams, SentimentLexicon};
use crate::text::{DictionaryStemmer, Ngrams, Preprocessor, StopList};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn artifact_err(path: &Path, reason: impl ToString) -> PipelineError {
    PipelineError::Artifact {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// The file without its leading `#` provenance lines.
fn body(text: &str) -> String {
    text.lines()
        .skip_while(|l| l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect()
}

impl Pipeline {
    fn write_text(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.out(name);
        let text = format!("{}\n{contents}", self.provenance.comment_line());
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    fn write_json<T: Serialize>(&self, name: &str, key: &str, value: &T) -> Result<()> {
        let path = self.out(name);
        let mut obj = serde_json::Map::new();
        obj.insert("provenance".into(), serde_json::to_value(&self.provenance).expect("serializable"));
        obj.insert(key.into(), serde_json::to_value(value).map_err(|e| artifact_err(&path, e))?);
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).expect("serializable");
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err(&path))
    }

    fn symbol(&self) -> String {
        self.config.symbol.clone().unwrap_or_else(|| {
            self.config
                .comments
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    fn corpus(&self) -> Result<CommentCorpus> {
        let path = self.out(artifact::COMMENTS);
        Ok(read_comments_csv(body(&read_text(&path)?).as_bytes(), &self.symbol(), chrono_tz::UTC)?)
    }

    fn bars(&self) -> Result<Vec<MarketBar>> {
        let path = self.out(artifact::MARKET);
        Ok(read_market_csv(read_text(&path)?.as_bytes())?)
    }

    fn ngrams(&self) -> Result<Vec<(String, Ngrams)>> {
        let path = self.out(artifact::NGRAMS);
        body(&read_text(&path)?)
            .lines()
            .map(|l| {
                let r: NgramRecord = serde_json::from_str(l).map_err(|e| artifact_err(&path, e))?;
                Ok((r.id, r.ngrams))
            })
            .collect()
    }

    fn lexicon(&self) -> Result<SentimentLexicon> {
        let path = self.config.lexicon.clone().unwrap_or_else(|| self.out(artifact::LEXICON));
        Ok(load_lexicon(&path)?)
    }

    fn classifier(&self) -> Result<TrainedClassifier> {
        let path = self.config.model.clone().unwrap_or_else(|| self.out(artifact::MODEL));
        let value: serde_json::Value =
            serde_json::from_str(&read_text(&path)?).map_err(|e| artifact_err(&path, e))?;
        let inner = value.get("classifier").cloned().unwrap_or(value);
        Ok(TrainedClassifier::from_json(&inner.to_string())?)
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str, key: &str) -> Result<T> {
        let path = self.out(name);
        let value: serde_json::Value =
            serde_json::from_str(&read_text(&path)?).map_err(|e| artifact_err(&path, e))?;
        let inner = value.get(key).cloned().ok_or_else(|| artifact_err(&path, format!("no `{key}` field")))?;
        serde_json::from_value(inner).map_err(|e| artifact_err(&path, e))
    }

    /// Comments carrying their final labels (human where given, predicted
    /// otherwise), with the polarity score of each.
    fn classified(&self) -> Result<(CommentCorpus, HashMap<String, f64>)> {
        let path = self.out(artifact::CLASSIFIED);
        let text = body(&read_text(&path)?);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut labels = HashMap::new();
        let mut scores = HashMap::new();
        for rec in rdr.deserialize::<ClassifiedRecord>() {
            let r = rec.map_err(|e| artifact_err(&path, e))?;
            labels.insert(r.id.clone(), r.label);
            scores.insert(r.id, r.score);
        }
        let mut corpus = self.corpus()?;
        for c in &mut corpus.comments {
            let label = labels
                .get(&c.id)
                .ok_or_else(|| artifact_err(&path, format!("comment {} was not classified", c.id)))?;
            c.label = Some(*label);
        }
        Ok((corpus, scores))
    }

    fn buckets(&self, corpus: &CommentCorpus, bars: &[MarketBar]) -> Result<DailyBuckets> {
        Ok(bucket_by_trading_day(corpus, bars, self.config.cutoff, self.config.timezone)?)
    }

    fn selection(&self) -> SelectionParams {
        SelectionParams {
            max_lag: self.config.max_lag,
            alpha: self.config.alpha,
            correction: self.config.correction,
        }
    }

    /// Target and candidate series on their common dates.
    fn model_series(&self) -> Result<(Series, Vec<Series>)> {
        let path = self.out(artifact::INDICATORS);
        let text = body(&read_text(&path)?);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| artifact_err(&path, e))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| artifact_err(&path, format!("missing column {name}")))
        };
        let date_col = col("date")?;
        let cols: Vec<usize> = self.config.candidates.iter().map(|c| col(c)).collect::<Result<_>>()?;
        let mut dates = Vec::new();
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| artifact_err(&path, e))?;
            let date = rec[date_col].parse().map_err(|e| artifact_err(&path, e))?;
            for (k, &j) in cols.iter().enumerate() {
                let cell = &rec[j];
                if cell.is_empty() {
                    return Err(artifact_err(
                        &path,
                        format!(
                            "{} is undefined on {date}; use missing_policy = neutral or carry_forward",
                            self.config.candidates[k]
                        ),
                    ));
                }
                values[k].push(cell.parse().map_err(|e| artifact_err(&path, e))?);
            }
            dates.push(date);
        }
        let close = close_series(&self.bars()?);
        let target = match self.config.target {
            Target::Return => daily_return(&close)?,
            Target::Close => close,
        };
        let mut all = vec![target];
        for (name, v) in self.config.candidates.iter().zip(values) {
            all.push(Series::new(name.clone(), dates.clone(), v)?);
        }
        let mut all = align(&all);
        let target = all.remove(0);
        Ok((target, all))
    }

    fn train_len(&self, n: usize) -> usize {
        train_len(n, self.config.train_fraction)
    }
}

#[derive(Serialize, Deserialize)]
struct NgramRecord {
    id: String,
    ngrams: Ngrams,
}

#[derive(Serialize, Deserialize)]
struct ClassifiedRecord {
    id: String,
    label: Sentiment,
    source: String,
    score: f64,
}

#[derive(Serialize)]
struct IngestSummary {
    symbol: String,
    comments: usize,
    bullish: usize,
    bearish: usize,
    unlabeled: usize,
    trading_days: usize,
    first_date: chrono::NaiveDate,
    last_date: chrono::NaiveDate,
}

pub(super) fn ingest(p: &Pipeline) -> Result<()> {
    let cfg = &p.config;
    let format = cfg.comments_format.unwrap_or(crate::ingest::CommentFormat::Csv);
    let mut corpus = load_comments(&cfg.comments, format, cfg.timezone)?;
    corpus.stock_symbol = p.symbol();
    let bars = load_market(&cfg.market)?;
    // Fails on comments that no trading day can take.
    p.buckets(&corpus, &bars)?;
    let mut buf = Vec::new();
    write_comments_csv(&corpus, &mut buf).map_err(|e| artifact_err(&p.out(artifact::COMMENTS), e))?;
    p.write_text(artifact::COMMENTS, &String::from_utf8(buf).expect("utf-8 csv"))?;
    let mut buf = Vec::new();
    write_market_csv(&bars, &mut buf).map_err(|e| artifact_err(&p.out(artifact::MARKET), e))?;
    p.write_text(artifact::MARKET, &String::from_utf8(buf).expect("utf-8 csv"))?;
    let (bullish, bearish, unlabeled) = corpus.label_counts();
    let summary = IngestSummary {
        symbol: corpus.stock_symbol.clone(),
        comments: corpus.len(),
        bullish,
        bearish,
        unlabeled,
        trading_days: bars.len(),
        first_date: bars[0].date,
        last_date: bars[bars.len() - 1].date,
    };
    p.write_json(artifact::INGEST, "summary", &summary)
}

fn preprocessor(p: &Pipeline) -> Result<Preprocessor> {
    let stemmer = match &p.config.stemmer_dict {
        Some(path) => DictionaryStemmer::from_tsv(File::open(path).map_err(io_err(path))?)?,
        None => DictionaryStemmer::bundled(),
    };
    let stop = match &p.config.stopwords {
        Some(path) => StopList::from_reader(File::open(path).map_err(io_err(path))?)?,
        None => StopList::bundled(),
    };
    Ok(Preprocessor::new(Arc::new(stemmer), stop))
}

pub(super) fn preprocess(p: &Pipeline) -> Result<()> {
    let pre = preprocessor(p)?;
    let corpus = p.corpus()?;
    let lines: Vec<String> = corpus
        .comments
        .par_iter()
        .map(|c| {
            let rec = NgramRecord {
                id: c.id.clone(),
                ngrams: pre.process(&c.text),
            };
            serde_json::to_string(&rec).expect("serializable")
        })
        .collect();
    let mut text = lines.join("\n");
    text.push('\n');
    p.write_text(artifact::NGRAMS, &text)
}

fn labeled_ngrams(p: &Pipeline) -> Result<Vec<(Ngrams, Sentiment)>> {
    let corpus = p.corpus()?;
    let ngrams: HashMap<String, Ngrams> = p.ngrams()?.into_iter().collect();
    corpus
        .comments
        .iter()
        .filter_map(|c| c.label.map(|l| (c, l)))
        .map(|(c, l)| {
            let g = ngrams
                .get(&c.id)
                .ok_or_else(|| artifact_err(&p.out(artifact::NGRAMS), format!("no n-grams for {}", c.id)))?;
            Ok((g.clone(), l))
        })
        .collect()
}

pub(super) fn build_lexicon_stage(p: &Pipeline) -> Result<()> {
    let docs = labeled_ngrams(p)?;
    let counts = count_contingency(docs.iter().map(|(g, l)| (g, Some(*l))))?;
    let params = LexiconParams {
        df_threshold: p.config.df_threshold,
        smoothing: p.config.smoothing,
        log_base: p.config.log_base,
        bigram_rule: p.config.bigram_rule,
    };
    let mut lex = build_lexicon(&counts, params)?;
    lex.provenance = Some(p.provenance.comment_line());
    save_lexicon(&lex, &p.out(artifact::LEXICON))?;
    Ok(())
}


fn classifier_config(p: &Pipeline) -> ClassifierConfig {
    ClassifierConfig {
        algorithm: p.config.algorithm,
        bagging_size: p.config.bagging_size,
        tree: TreeParams {
            confidence: p.config.confidence,
            min_leaf: p.config.min_leaf,
        },
        seed: p.config.seed,
    }
}

#[derive(Serialize)]
struct CvRecord {
    k_folds: usize,
    include_score: bool,
    algorithm: String,
    n_examples: usize,
    metrics: Option<crate::classifier::EvalMetrics>,
}

pub(super) fn train_stage(p: &Pipeline) -> Result<()> {
    let lex = p.lexicon()?;
    let include = p.config.include_score;
    let vectors: Vec<_> = labeled_ngrams(p)?
        .iter()
        .map(|(g, l)| featurize(g, &lex, include, Some(*l)))
        .collect();
    let schema = FeatureSchema::from_lexicon(&lex, include);
    let config = classifier_config(p);
    let metrics = if p.config.k_folds >= 2 {
        let data = Dataset::from_vectors(&vectors, &schema)?;
        Some(cross_validate(&data, &schema, &config, p.config.k_folds)?)
    } else {
        None
    };
    let model = train(&vectors, &schema, &config)?;
    p.write_json(artifact::MODEL, "classifier", &model)?;
    let cv = CvRecord {
        k_folds: p.config.k_folds,
        include_score: include,
        algorithm: config.algorithm.to_string(),
        n_examples: vectors.len(),
        metrics,
    };
    p.write_json(artifact::CV, "cross_validation", &cv)
}


pub(super) fn classify(p: &Pipeline) -> Result<()> {
    let lex = p.lexicon()?;
    let model = p.classifier()?;
    let corpus = p.corpus()?;
    let ngrams: HashMap<String, Ngrams> = p.ngrams()?.into_iter().collect();
    let records: Vec<ClassifiedRecord> = corpus
        .comments
        .par_iter()
        .map(|c| {
            let g = ngrams
                .get(&c.id)
                .ok_or_else(|| artifact_err(&p.out(artifact::NGRAMS), format!("no n-grams for {}", c.id)))?;
            let (label, source) = match c.label {
                Some(l) => (l, "human"),
                None => (model.predict(&featurize(g, &lex, model.schema.include_score, None))?, "predicted"),
            };
            Ok(ClassifiedRecord {
                id: c.id.clone(),
                label,
                source: source.into(),
                score: comment_score(g, &lex),
            })
        })
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &records {
        w.serialize(r).map_err(|e| artifact_err(&p.out(artifact::CLASSIFIED), e))?;
    }
    let bytes = w.into_inner().map_err(|e| artifact_err(&p.out(artifact::CLASSIFIED), e))?;
    p.write_text(artifact::CLASSIFIED, &String::from_utf8(bytes).expect("utf-8 csv"))
}

pub(super) fn trust(p: &Pipeline) -> Result<()> {
    let (corpus, _) = p.classified()?;
    let bars = p.bars()?;
    let buckets = p.buckets(&corpus, &bars)?;
    let window = match p.config.trust_window {
        Some(w) => w,
        None => {
            let n = p.train_len(bars.len()).clamp(1, bars.len().saturating_sub(1).max(1));
            (bars[0].date, bars[n - 1].date)
        }
    };
    let table = compute_trust(&buckets, &bars, window, p.config.default_tc)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(io_err(&p.out(artifact::TRUST)))?;
    p.write_text(artifact::TRUST, &String::from_utf8(buf).expect("utf-8 csv"))
}

#[derive(Deserialize)]
struct TrustRecord {
    user: String,
    comments: u64,
    active_days: u64,
    qualified: bool,
    tc: f64,
}

fn read_trust(p: &Pipeline) -> Result<TrustTable> {
    let path = p.out(artifact::TRUST);
    let text = body(&read_text(&path)?);
    let mut table = TrustTable::uniform(&p.symbol(), p.config.default_tc);
    for rec in csv::Reader::from_reader(text.as_bytes()).deserialize::<TrustRecord>() {
        let r = rec.map_err(|e| artifact_err(&path, e))?;
        if r.qualified {
            table.coefficients.insert(r.user.clone(), r.tc);
        }
        table.activity.insert(
            r.user,
            UserActivity {
                comments: r.comments,
                active_days: r.active_days,
            },
        );
    }
    Ok(table)
}

pub(super) fn indices(p: &Pipeline) -> Result<()> {
    let (corpus, scores) = p.classified()?;
    let bars = p.bars()?;
    let buckets = p.buckets(&corpus, &bars)?;
    let trust = read_trust(p)?;
    let rows = compute_daily_indices(&buckets, &scores, &trust, p.config.missing_policy)?;
    let mut buf = Vec::new();
    write_indicators_csv(&rows, &mut buf).map_err(io_err(&p.out(artifact::INDICATORS)))?;
    p.write_text(artifact::INDICATORS, &String::from_utf8(buf).expect("utf-8 csv"))
}

fn training_segment(p: &Pipeline) -> Result<(Series, Vec<Series>)> {
    let (target, cands) = p.model_series()?;
    let n = p.train_len(target.len());
    Ok((target.head(n), cands.iter().map(|c| c.head(n)).collect()))
}

pub(super) fn analyze(p: &Pipeline) -> Result<()> {
    let (target, cands) = training_segment(p)?;
    let max_lag = p.config.max_lag;
    let mut acf_out = String::from("series,lag,correlation,lower,upper,significant\n");
    for s in std::iter::once(&target).chain(&cands) {
        match acf(&s.values, max_lag) {
            Ok(rows) => {
                for r in rows {
                    let _ = writeln!(acf_out, "{},{},{},{},{},{}", s.name, r.lag, r.correlation, -r.band, r.band, r.significant);
                }
            }
            Err(EconError::ZeroVariance(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    p.write_text(artifact::ACF, &acf_out)?;

    let mut ccf_out = String::from("candidate,lag,correlation,lower,upper,significant\n");
    for c in &cands {
        match ccf(&c.values, &target.values, max_lag) {
            Ok(rows) => {
                for r in rows {
                    let _ = writeln!(ccf_out, "{},{},{},{},{},{}", c.name, r.lag, r.correlation, -r.band, r.band, r.significant);
                }
            }
            Err(EconError::ZeroVariance(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    p.write_text(artifact::CCF, &ccf_out)?;

    let mut g_out = String::from("candidate,lag,ccf,f_statistic,p_value,granger_alpha,causal\n");
    for s in screen_candidates(&target, &cands, &p.selection())? {
        for l in &s.screened {
            let _ = writeln!(
                g_out,
                "{},{},{},{},{},{},{}",
                s.candidate, l.lag, l.ccf, l.granger.f_statistic, l.granger.p_value, s.granger_alpha, l.granger.causal
            );
        }
    }
    p.write_text(artifact::GRANGER, &g_out)
}

pub(super) fn fit(p: &Pipeline) -> Result<()> {
    let (target, cands) = training_segment(p)?;
    let params = p.selection();
    let m0 = fit_m0(&target, &params)?;
    let m1 = build_m1(&m0, &target, &cands, &params)?;
    p.write_json(artifact::M0, "model", &m0)?;
    p.write_json(artifact::M1, "model", &m1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub mape: f64,
    pub direction_accuracy: f64,
    pub mape_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub target: String,
    pub n_train: usize,
    pub n_test: usize,
    pub m0: ModelScore,
    pub m1: ModelScore,
}

fn score(r: &EvalReport) -> ModelScore {
    ModelScore {
        mape: r.mape,
        direction_accuracy: r.direction_accuracy,
        mape_skipped: r.mape_skipped,
    }
}

pub(super) fn evaluate(p: &Pipeline) -> Result<()> {
    let (target, cands) = p.model_series()?;
    let m0: RegressionModel = p.read_json(artifact::M0, "model")?;
    let m1: RegressionModel = p.read_json(artifact::M1, "model")?;
    let frac = p.config.train_fraction;
    let e0 = evaluate_model(&m0, frac, &target, &cands)?;
    let e1 = evaluate_model(&m1, frac, &target, &cands)?;
    let mut out = String::from("date,actual,m0,m1\n");
    for (a, b) in e0.points.iter().zip(&e1.points) {
        let _ = writeln!(out, "{},{},{},{}", a.date, a.actual, a.predicted, b.predicted);
    }
    p.write_text(artifact::PREDICTIONS, &out)?;
    let eval = Evaluation {
        target: target.name.clone(),
        n_train: p.train_len(target.len()),
        n_test: e0.n_test,
        m0: score(&e0),
        m1: score(&e1),
    };
    p.write_json(artifact::EVALUATION, "evaluation", &eval)
}

/// `y(t) = a + b·x(t−k) + …` with six decimals.
pub fn equation(m: &RegressionModel) -> String {
    let mut parts = Vec::new();
    if let Some(c) = m.intercept {
        parts.push(format!("{:.6}", c.value));
    }
    for t in &m.terms {
        parts.push(format!("{:.6}·{}(t-{})", t.coefficient, t.series, t.lag));
    }
    if parts.is_empty() {
        parts.push("0".into());
    }
    format!("{}(t) = {}", m.target, parts.join(" + ")).replace("+ -", "- ")
}

fn flags(m: &RegressionModel) -> String {
    let f: Vec<String> = m
        .flags
        .iter()
        .map(|f| serde_json::to_value(f).expect("serializable").as_str().unwrap_or_default().to_string())
        .collect();
    f.join(";")
}

pub(super) fn report(p: &Pipeline) -> Result<()> {
    let m0: RegressionModel = p.read_json(artifact::M0, "model")?;
    let m1: RegressionModel = p.read_json(artifact::M1, "model")?;
    let eval: Evaluation = p.read_json(artifact::EVALUATION, "evaluation")?;
    let symbol = p.symbol();
    let rows: BTreeMap<&str, (&RegressionModel, &ModelScore)> =
        [("M0", (&m0, &eval.m0)), ("M1", (&m1, &eval.m1))].into_iter().collect();

    let mut csv_out = String::from("stock,model,target,mape,direction_accuracy,n_test,mape_skipped,residuals_white,flags,equation\n");
    let mut md = format!(
        "{}\n\n# {symbol}: baseline vs sentiment-augmented model\n\nTarget `{}`, {} training and {} test points.\n\n| Model | MAPE (%) | DA | Residuals white | Flags |\n|---|---|---|---|---|\n",
        p.provenance.comment_line().replacen("# ", "<!-- ", 1) + " -->",
        eval.target,
        eval.n_train,
        eval.n_test
    );
    for (name, (m, s)) in &rows {
        let _ = writeln!(
            csv_out,
            "{symbol},{name},{},{},{},{},{},{},{},\"{}\"",
            eval.target,
            s.mape,
            s.direction_accuracy,
            eval.n_test,
            s.mape_skipped,
            m.residuals_white,
            flags(m),
            equation(m)
        );
        let _ = writeln!(
            md,
            "| {name} | {:.2} | {:.2} | {} | {} |",
            s.mape,
            s.direction_accuracy,
            m.residuals_white,
            if m.flags.is_empty() { "-".into() } else { flags(m) }
        );
    }
    md.push('\n');
    for (name, (m, _)) in &rows {
        let _ = writeln!(md, "- {name}: `{}`", equation(m));
    }
    p.write_text(artifact::REPORT, &csv_out)?;
    let path = p.out(artifact::REPORT_MD);
    std::fs::write(&path, md).map_err(io_err(&path))
}
