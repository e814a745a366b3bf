//! Choosing the nonparametric initial constant on a proxy with known answer.

use crate::detector::{run_nonparametric_on_sums, stage_sums};
use crate::oracle::{classify_family, OracleLabel};
use crate::posterior::{StageConfig, Thresholds};
use crate::series::{Family, SeriesSpec, SeriesStream};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("no initial constant reaches agreement {floor} (best {best} at C1 = {best_c1})")]
    NoFeasibleC1 { floor: f64, best: f64, best_c1: f64 },
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
    #[error("proxy has no analytic label: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub p_grid: Vec<f64>,
    pub c1_grid: Vec<f64>,
    pub stages: StageConfig,
    pub step: f64,
    /// Minimum fraction of the p-grid on which the verdict must equal the
    /// analytic label.
    pub floor: f64,
    pub thresholds: Thresholds,
}

/// `start, start + step, ..., <= stop`, built from integer multiples.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| round9(start + k as f64 * step)).collect()
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl CalibrationConfig {
    /// Deterministic `sum i^(-2p)` over p = 0.1..1.5 (step 0.05) without the
    /// band around the boundary, C1 = 0.01..2.00 (step 0.01), n_j = 1000,
    /// K = 2000.
    pub fn dirichlet_proxy() -> Self {
        Self {
            p_grid: grid(0.1, 1.5, 0.05)
                .into_iter()
                .filter(|p| !(0.45..=0.55).contains(p))
                .collect(),
            c1_grid: grid(0.01, 2.0, 0.01),
            stages: StageConfig {
                stage_len: 1000,
                stages: 2000,
            },
            step: crate::bounds::DEFAULT_STEP,
            floor: 0.0,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub recommended: f64,
    /// Agreement fraction of the recommended value.
    pub agreement: f64,
    /// `(c1, agreement)` for every grid point, in grid order.
    pub scores: Vec<(f64, f64)>,
}

impl Calibration {
    /// Grid points sharing the best agreement.
    pub fn best_set(&self) -> Vec<f64> {
        self.scores
            .iter()
            .filter(|(_, a)| *a == self.agreement)
            .map(|(c, _)| *c)
            .collect()
    }
}

/// The C1 on the grid that maximises agreement with the oracle over the
/// p-grid, ties going to the smallest value.
pub fn calibrate_c1(cfg: &CalibrationConfig) -> Result<Calibration, CalibrationError> {
    calibrate_with(cfg, |p| Family::DeterministicDirichlet { p })
}

/// As [`calibrate_c1`] with an arbitrary seeded proxy family.
pub fn calibrate_with(
    cfg: &CalibrationConfig,
    family: impl Fn(f64) -> Family + Sync,
) -> Result<Calibration, CalibrationError> {
    if cfg.p_grid.is_empty() {
        return Err(CalibrationError::EmptyGrid("p"));
    }
    if cfg.c1_grid.is_empty() {
        return Err(CalibrationError::EmptyGrid("C1"));
    }
    let proxies: Vec<(Vec<f64>, OracleLabel)> = cfg
        .p_grid
        .par_iter()
        .map(|&p| {
            let spec = SeriesSpec::new(family(p), 0);
            let truth = classify_family(&spec)
                .map_err(|e| CalibrationError::Oracle(e.to_string()))?
                .label;
            let sums = stage_sums(&mut SeriesStream::new(spec), &cfg.stages)
                .expect("generated series never run out");
            Ok((sums, truth))
        })
        .collect::<Result<_, _>>()?;
    let scores: Vec<(f64, f64)> = cfg
        .c1_grid
        .par_iter()
        .map(|&c1| {
            let hits = proxies
                .iter()
                .filter(|(sums, truth)| {
                    *truth
                        == run_nonparametric_on_sums(sums, c1, cfg.step, &cfg.thresholds)
                            .verdict
                            .label
                })
                .count();
            (c1, hits as f64 / proxies.len() as f64)
        })
        .collect();
    let (best_c1, best) =
        scores
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |acc, (c, a)| {
                if a > acc.1 {
                    (c, a)
                } else {
                    acc
                }
            });
    if best < cfg.floor {
        return Err(CalibrationError::NoFeasibleC1 {
            floor: cfg.floor,
            best,
            best_c1,
        });
    }
    Ok(Calibration {
        recommended: best_c1,
        agreement: best,
        scores,
    })
}
