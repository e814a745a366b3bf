//! Bayesian convergence diagnostics for random infinite series.
//!
//! A series is consumed in stages of `n` summands. After each stage the
//! partial sum is compared with a bound; the resulting indicator updates a
//! Beta posterior on the probability that the series converges.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod climate;
pub mod detector;
pub mod harness;
pub mod oracle;
pub mod posterior;
pub mod reduce;
pub mod rng;
pub mod series;

pub use bounds::{BoundError, BoundStrategy};
pub use detector::{run_detector, DetectorError, DetectorRun};
pub use posterior::{Label, StageConfig, Thresholds, Verdict};
pub use series::{Family, ParamSchedule, SeriesSpec, SeriesStream};
