//! Trace analysis and the applications built on it: contraction-rate
//! estimation, the local-metric regression corpus and model, and the two
//! anomaly-detection procedures.

mod anomaly;
mod corpus;
mod gamma;
mod regression;

pub use anomaly::{
    alarm_classify, classify_values, outlier_detect, outlier_distance, predicted_sigma, tally, ClassificationOutcome,
};
pub use corpus::{
    build_corpus, desk_specs, measure_gamma, read_corpus_csv, write_corpus_csv, CorpusEntry, CorpusOptions,
    CorpusReport, FamilyMix,
};
pub use gamma::{
    estimate_gamma, fit_contraction, fit_contraction_points, fit_log_linear, ContractionFit, MIN_STATIONARY_SAMPLES,
    NUMERIC_FLOOR, TRANSIENT_DECADES,
};
pub use regression::{fit_linear3, fit_model, RateModel};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("only {found} stationary samples, need at least {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("disagreement does not decrease (slope {slope})")]
    NonDecreasing { slope: f64 },
    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("need at least {needed} corpus entries, got {got}")]
    CorpusTooSmall { needed: usize, got: usize },
    #[error("corpus file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
