//! Forum-sentiment indicators and their use in stock-return regressions.

pub mod ingest;
pub mod text;
pub mod lexicon;
pub mod classifier;
pub mod rng;
pub mod indicators;
pub mod econometrics;
pub mod pipeline;
pub mod synth;
