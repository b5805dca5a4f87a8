//! Run classification and the threshold-bisection experiment.

mod classify;
mod threshold;

pub use classify::{classify_run, RunClass};
pub use threshold::{
    default_grid, run_threshold_bisection, BracketStatus, Classifier, ClassifiedRun, DnsClassifier, IcFamily,
    MockClassifier, NuBracket, ThresholdQuery, ThresholdResult,
};
