//! Stage-by-stage orchestration over an output directory of artifacts.
//!
//! Each stage reads the artifacts of its upstream stages and writes its own.
//! Every artifact starts with a provenance record carrying the config hash
//! and seed (`# config_sha256=…; seed=…` in text files, a `provenance` object
//! in JSON files).

mod config;
mod stages;

pub use stages::{equation, Evaluation, ModelScore};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{PipelineConfig, RawConfig, Target, CANDIDATE_SERIES, KEYS};

use crate::classifier::ClassifierError;
use crate::econometrics::EconError;
use crate::indicators::IndicatorError;
use crate::ingest::IngestError;
use crate::lexicon::LexiconError;
use crate::text::TextError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("stage `{stage}`: input {path} does not exist")]
    MissingInput { stage: Stage, path: String },
    #[error("stage `{stage}` needs {artifact}; run `{run_first}` first")]
    MissingUpstream {
        stage: Stage,
        artifact: String,
        run_first: Stage,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Artifact { path: String, reason: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Econometrics(#[from] EconError),
}

impl PipelineError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::MissingInput { .. } => "missing_input",
            Self::MissingUpstream { .. } => "missing_upstream",
            Self::Io { .. } => "io",
            Self::Artifact { .. } => "artifact",
            Self::Ingest(_) => "ingest",
            Self::Text(_) => "text",
            Self::Lexicon(_) => "lexicon",
            Self::Classifier(_) => "classifier",
            Self::Indicator(_) => "indicators",
            Self::Econometrics(_) => "econometrics",
        }
    }

    /// Details for the error record: the problem list, or the stage to run.
    pub fn details(&self) -> serde_json::Value {
        match self {
            Self::Config(errors) => serde_json::json!({ "problems": errors }),
            Self::MissingUpstream {
                stage,
                artifact,
                run_first,
            } => serde_json::json!({
                "stage": stage.name(),
                "artifact": artifact,
                "run_first": run_first.name(),
            }),
            Self::MissingInput { stage, path } => serde_json::json!({ "stage": stage.name(), "path": path }),
            _ => serde_json::Value::Null,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Preprocess,
    BuildLexicon,
    Train,
    Classify,
    Trust,
    Indices,
    Analyze,
    Fit,
    Evaluate,
    Report,
}

pub mod artifact {
    pub const COMMENTS: &str = "comments.csv";
    pub const MARKET: &str = "market.csv";
    pub const INGEST: &str = "ingest.json";
    pub const NGRAMS: &str = "ngrams.jsonl";
    pub const LEXICON: &str = "lexicon.jsonl";
    pub const MODEL: &str = "model.json";
    pub const CV: &str = "cv_metrics.json";
    pub const CLASSIFIED: &str = "classified.csv";
    pub const TRUST: &str = "trust.csv";
    pub const INDICATORS: &str = "indicators.csv";
    pub const ACF: &str = "acf.csv";
    pub const CCF: &str = "ccf.csv";
    pub const GRANGER: &str = "granger.csv";
    pub const M0: &str = "m0.json";
    pub const M1: &str = "m1.json";
    pub const PREDICTIONS: &str = "predictions.csv";
    pub const EVALUATION: &str = "evaluation.json";
    pub const REPORT: &str = "report.csv";
    pub const REPORT_MD: &str = "report.md";
}

impl Stage {
    /// Execution order; every stage's upstream comes earlier.
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::BuildLexicon,
        Stage::Train,
        Stage::Classify,
        Stage::Trust,
        Stage::Indices,
        Stage::Analyze,
        Stage::Fit,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ingest => "ingest",
            Self::Preprocess => "preprocess",
            Self::BuildLexicon => "build-lexicon",
            Self::Train => "train",
            Self::Classify => "classify",
            Self::Trust => "trust",
            Self::Indices => "indices",
            Self::Analyze => "analyze",
            Self::Fit => "fit",
            Self::Evaluate => "evaluate",
            Self::Report => "report",
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        use artifact::*;
        match self {
            Self::Ingest => &[COMMENTS, MARKET, INGEST],
            Self::Preprocess => &[NGRAMS],
            Self::BuildLexicon => &[LEXICON],
            Self::Train => &[MODEL, CV],
            Self::Classify => &[CLASSIFIED],
            Self::Trust => &[TRUST],
            Self::Indices => &[INDICATORS],
            Self::Analyze => &[ACF, CCF, GRANGER],
            Self::Fit => &[M0, M1],
            Self::Evaluate => &[PREDICTIONS, EVALUATION],
            Self::Report => &[REPORT, REPORT_MD],
        }
    }

    /// Artifacts read by the stage, with the stage producing each. The
    /// lexicon and the classifier may instead come from configured files.
    pub fn upstream(self, cfg: &PipelineConfig) -> Vec<(&'static str, Stage)> {
        use artifact::*;
        let lexicon = cfg.lexicon.is_none().then_some((LEXICON, Stage::BuildLexicon));
        let model = cfg.model.is_none().then_some((MODEL, Stage::Train));
        let mut v = match self {
            Self::Ingest => vec![],
            Self::Preprocess => vec![(COMMENTS, Stage::Ingest)],
            Self::BuildLexicon => vec![(COMMENTS, Stage::Ingest), (NGRAMS, Stage::Preprocess)],
            Self::Train => vec![(COMMENTS, Stage::Ingest), (NGRAMS, Stage::Preprocess)],
            Self::Classify => vec![(COMMENTS, Stage::Ingest), (NGRAMS, Stage::Preprocess)],
            Self::Trust => vec![(COMMENTS, Stage::Ingest), (MARKET, Stage::Ingest), (CLASSIFIED, Stage::Classify)],
            Self::Indices => vec![
                (COMMENTS, Stage::Ingest),
                (MARKET, Stage::Ingest),
                (CLASSIFIED, Stage::Classify),
                (TRUST, Stage::Trust),
            ],
            Self::Analyze | Self::Fit => vec![(MARKET, Stage::Ingest), (INDICATORS, Stage::Indices)],
            Self::Evaluate => vec![(MARKET, Stage::Ingest), (INDICATORS, Stage::Indices), (M0, Stage::Fit), (M1, Stage::Fit)],
            Self::Report => vec![(M0, Stage::Fit), (M1, Stage::Fit), (EVALUATION, Stage::Evaluate)],
        };
        match self {
            Self::Train => v.extend(lexicon),
            Self::Classify => v.extend(lexicon.into_iter().chain(model)),
            _ => {}
        }
        v
    }

    /// Stages whose outputs this stage reads.
    pub fn dependencies(self, cfg: &PipelineConfig) -> Vec<Stage> {
        let mut d: Vec<Stage> = self.upstream(cfg).into_iter().map(|(_, s)| s).collect();
        d.sort();
        d.dedup();
        d
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s || st.name().replace('-', "_") == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Stages needed to produce `targets`, upstream first.
pub fn plan(targets: &[Stage], cfg: &PipelineConfig) -> Vec<Stage> {
    let mut needed = std::collections::BTreeSet::new();
    let mut stack: Vec<Stage> = targets.to_vec();
    while let Some(s) = stack.pop() {
        if needed.insert(s) {
            stack.extend(s.dependencies(cfg));
        }
    }
    Stage::ALL.into_iter().filter(|s| needed.contains(s)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(cfg: &PipelineConfig) -> Self {
        Self {
            config_sha256: cfg.hash(),
            seed: cfg.seed,
        }
    }

    pub fn comment_line(&self) -> String {
        format!("# config_sha256={}; seed={}", self.config_sha256, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub outputs: Vec<PathBuf>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub provenance: Provenance,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self {
            provenance: Provenance::of(&config),
            config,
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn check_inputs(&self, stage: Stage) -> Result<()> {
        let external: Vec<&Path> = match stage {
            Stage::Ingest => vec![&self.config.comments, &self.config.market],
            Stage::Preprocess => {
                self.config.stemmer_dict.iter().chain(&self.config.stopwords).map(PathBuf::as_path).collect()
            }
            Stage::Train | Stage::Classify => self.config.lexicon.iter().map(PathBuf::as_path).collect(),
            _ => vec![],
        };
        let external = external.into_iter().chain(match stage {
            Stage::Classify => self.config.model.as_deref(),
            _ => None,
        });
        for p in external {
            if !p.exists() {
                return Err(PipelineError::MissingInput {
                    stage,
                    path: p.display().to_string(),
                });
            }
        }
        for (artifact, producer) in stage.upstream(&self.config) {
            if !self.out(artifact).exists() {
                return Err(PipelineError::MissingUpstream {
                    stage,
                    artifact: artifact.to_string(),
                    run_first: producer,
                });
            }
        }
        Ok(())
    }

    /// Runs one stage against the artifacts already in the output directory.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome> {
        self.check_inputs(stage)?;
        std::fs::create_dir_all(&self.config.out).map_err(|source| PipelineError::Io {
            path: self.config.out.display().to_string(),
            source,
        })?;
        match stage {
            Stage::Ingest => stages::ingest(self),
            Stage::Preprocess => stages::preprocess(self),
            Stage::BuildLexicon => stages::build_lexicon_stage(self),
            Stage::Train => stages::train_stage(self),
            Stage::Classify => stages::classify(self),
            Stage::Trust => stages::trust(self),
            Stage::Indices => stages::indices(self),
            Stage::Analyze => stages::analyze(self),
            Stage::Fit => stages::fit(self),
            Stage::Evaluate => stages::evaluate(self),
            Stage::Report => stages::report(self),
        }?;
        Ok(StageOutcome {
            stage,
            outputs: stage.outputs().iter().map(|o| self.out(o)).collect(),
        })
    }

    pub fn run_all(&self) -> Result<Vec<StageOutcome>> {
        Stage::ALL.iter().map(|&s| self.run_stage(s)).collect()
    }

    /// Human-readable plan for `stages`: inputs and outputs of each.
    pub fn describe(&self, stages: &[Stage]) -> String {
        let mut s = format!("{}\n", self.provenance.comment_line());
        for (i, st) in stages.iter().enumerate() {
            let inputs: Vec<String> = st
                .upstream(&self.config)
                .iter()
                .map(|(a, p)| {
                    let mark = if self.out(a).exists() { "present" } else { "absent" };
                    format!("{a} ({p}, {mark})")
                })
                .collect();
            s.push_str(&format!(
                "{}. {}\n   reads: {}\n   writes: {}\n",
                i + 1,
                st,
                if inputs.is_empty() { "comments and market files".to_string() } else { inputs.join(", ") },
                st.outputs().join(", ")
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PipelineConfig {
        RawConfig::from_toml("comments = \"c.csv\"\nmarket = \"m.csv\"\n", Path::new("/x")).unwrap().resolve().unwrap()
    }

    #[test]
    fn graph_is_acyclic_in_declared_order() {
        let c = cfg();
        for (i, s) in Stage::ALL.iter().enumerate() {
            for d in s.dependencies(&c) {
                let j = Stage::ALL.iter().position(|x| *x == d).unwrap();
                assert!(j < i, "{s} depends on later {d}");
            }
        }
    }

    #[test]
    fn plan_pulls_in_upstream() {
        let c = cfg();
        let p = plan(&[Stage::Fit], &c);
        assert_eq!(p.first(), Some(&Stage::Ingest));
        assert_eq!(p.last(), Some(&Stage::Fit));
        assert!(!p.contains(&Stage::Analyze));
        let mut c2 = c.clone();
        c2.lexicon = Some("lex.jsonl".into());
        c2.model = Some("m.json".into());
        assert!(!plan(&[Stage::Classify], &c2).contains(&Stage::Train));
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert_eq!("build_lexicon".parse::<Stage>().unwrap(), Stage::BuildLexicon);
        assert!("plot".parse::<Stage>().is_err());
    }

    #[test]
    fn fit_before_indices_names_the_missing_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg();
        c.out = dir.path().to_path_buf();
        std::fs::write(dir.path().join(artifact::MARKET), "date,close\n").unwrap();
        match Pipeline::new(c).run_stage(Stage::Fit) {
            Err(PipelineError::MissingUpstream { run_first, artifact, .. }) => {
                assert_eq!(run_first, Stage::Indices);
                assert_eq!(artifact, "indicators.csv");
            }
            other => panic!("{other:?}"),
        }
    }
}
