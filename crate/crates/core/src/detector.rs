//! The stage loop: partial sums, bounds, indicators, posterior.

use crate::bounds::{BoundError, BoundStrategy};
use crate::posterior::{
    classify, DetectorState, PosteriorPoint, StageConfig, StageOutcome, Thresholds, Verdict,
};
use crate::reduce;
use crate::series::{SeriesError, SummandSource};
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectorError {
    #[error(transparent)]
    Source(#[from] SeriesError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub outcome: StageOutcome,
    pub posterior: PosteriorPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRun {
    pub records: Vec<StageRecord>,
    pub verdict: Verdict,
}

impl DetectorRun {
    pub fn posterior_means(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.posterior.mean)
    }

    /// Writes the trajectory CSV: `stage,S_j,c_j,y_j,post_mean,post_var`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "stage,S_j,c_j,y_j,post_mean,post_var")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.outcome.stage,
                fmt_decimal(r.outcome.partial_sum),
                fmt_decimal(r.outcome.bound),
                u8::from(r.outcome.indicator),
                fmt_decimal(r.posterior.mean),
                fmt_decimal(r.posterior.variance),
            )?;
        }
        Ok(())
    }
}

/// Plain decimal notation with 17 significant digits.
pub fn fmt_decimal(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return format!("{:.16}", 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (16 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Runs `cfg.stages` stages over `source` and classifies the trajectory.
pub fn run_detector(
    source: &mut dyn SummandSource,
    bound: &mut BoundStrategy,
    cfg: &StageConfig,
    thresholds: &Thresholds,
) -> Result<DetectorRun, DetectorError> {
    let mut block = vec![0.0; cfg.stage_len];
    let mut state = DetectorState::with_capacity(cfg.stages);
    let mut records = Vec::with_capacity(cfg.stages);
    for stage in 1..=cfg.stages {
        source.fill_block(&mut block)?;
        let first = cfg.first_index(stage);
        let partial_sum = reduce::ordered_sum(&block);
        let c = bound.stage_bound(stage, first, &block)?;
        let outcome = StageOutcome::new(stage, partial_sum, c);
        bound.observe(outcome.indicator);
        let posterior = state.step(outcome.indicator);
        records.push(StageRecord { outcome, posterior });
    }
    let verdict = classify(state.trajectory(), thresholds);
    Ok(DetectorRun { records, verdict })
}

/// Runs the nonparametric bound over precomputed stage partial sums.
///
/// Used where the partial sums do not depend on the bound, e.g. when many
/// initial constants are tried against the same series.
pub fn run_nonparametric_on_sums(
    partial_sums: &[f64],
    c1: f64,
    step: f64,
    thresholds: &Thresholds,
) -> DetectorRun {
    let mut bound = BoundStrategy::nonparametric(c1, step);
    let mut state = DetectorState::with_capacity(partial_sums.len());
    let mut records = Vec::with_capacity(partial_sums.len());
    for (k, &s) in partial_sums.iter().enumerate() {
        let stage = k + 1;
        let c = bound
            .stage_bound(stage, 0, &[])
            .expect("nonparametric bound is infallible");
        let outcome = StageOutcome::new(stage, s, c);
        bound.observe(outcome.indicator);
        let posterior = state.step(outcome.indicator);
        records.push(StageRecord { outcome, posterior });
    }
    let verdict = classify(state.trajectory(), thresholds);
    DetectorRun { records, verdict }
}

/// Stage partial sums of `source` without running any bound.
pub fn stage_sums(
    source: &mut dyn SummandSource,
    cfg: &StageConfig,
) -> Result<Vec<f64>, SeriesError> {
    let mut block = vec![0.0; cfg.stage_len];
    let mut sums = Vec::with_capacity(cfg.stages);
    for _ in 0..cfg.stages {
        source.fill_block(&mut block)?;
        sums.push(reduce::ordered_sum(&block));
    }
    Ok(sums)
}
