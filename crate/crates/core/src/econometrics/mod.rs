//! Returns, lag correlations, OLS and Granger tests, and the baseline and
//! sentiment-augmented regression models with their out-of-sample scores.

mod correlation;
mod model;
mod ols;
mod series;

pub use correlation::{acf, ccf, white_noise_band, LagCorrelation};
pub use model::{
    build_m1, direction_accuracy, evaluate, fit_m0, mape, predict_one_step, residuals_white, screen_candidates,
    train_len, CandidateScreen, Coefficient, Correction, EvalReport, History, LagScreen, ModelFlag, PredictionPoint,
    RegressionModel, SelectionParams, Term, DEFAULT_ALPHA, DEFAULT_MAX_LAG, DEFAULT_TRAIN_FRACTION, INTERCEPT,
    WHITENESS_LAGS,
};
pub use ols::{fit_ols, granger_test, GrangerResult, OlsFit};
pub use series::{align, close_series, daily_return, Series};

#[derive(Debug, thiserror::Error)]
pub enum EconError {
    #[error("{what} needs at least {need} points, got {got}")]
    TooShort { what: String, need: usize, got: usize },
    #[error("{0} has zero variance")]
    ZeroVariance(String),
    #[error("rank-deficient design; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("missing history for {series} at lag {lag}")]
    MissingHistory { series: String, lag: usize },
    #[error("shape: {0}")]
    Shape(String),
    #[error("invalid setting: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Format(String),
}
