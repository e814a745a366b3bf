//! Stage-wise Beta-Bernoulli recursion and the verdict rule.
//!
//! At stage `k` the posterior of the convergence probability is
//! `Beta(A_k + Y_k, k + A_k - Y_k)` where `A_k = sum_{j<=k} 1/j^2` and
//! `Y_k = sum_{j<=k} y_j`. [`DetectorState`] carries `A_k` and `Y_k` and
//! records the posterior mean and variance after every stage.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Stage layout: `n_j` summands per stage, `K` stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage_len: usize,
    pub stages: usize,
}

impl StageConfig {
    pub fn new(stage_len: usize, stages: usize) -> Result<Self, ConfigError> {
        if stage_len == 0 {
            return Err(ConfigError("stage length n_j must be at least 1".into()));
        }
        if stages == 0 {
            return Err(ConfigError("stage count K must be at least 1".into()));
        }
        Ok(Self { stage_len, stages })
    }

    /// Total number of summands consumed by a full run.
    pub fn total_summands(&self) -> u64 {
        self.stage_len as u64 * self.stages as u64
    }

    /// 1-based global index of the first summand of stage `j` (1-based).
    pub fn first_index(&self, stage: usize) -> u64 {
        (stage as u64 - 1) * self.stage_len as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid stage configuration: {0}")]
pub struct ConfigError(pub String);

/// One stage of a detector run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOutcome {
    pub stage: usize,
    pub partial_sum: f64,
    pub bound: f64,
    pub indicator: bool,
}

impl StageOutcome {
    /// Builds the outcome, setting the indicator to `|S_j| <= c_j`.
    pub fn new(stage: usize, partial_sum: f64, bound: f64) -> Self {
        Self {
            stage,
            partial_sum,
            bound,
            indicator: partial_sum.abs() <= bound,
        }
    }
}

/// Posterior summary after one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPoint {
    pub mean: f64,
    pub variance: f64,
}

/// Beta mean and variance from the cumulative statistics.
pub fn beta_moments(k: u64, sum_alpha: f64, sum_y: u64) -> PosteriorPoint {
    let k = k as f64;
    let y = sum_y as f64;
    let a = sum_alpha + y;
    let b = k + sum_alpha - y;
    let total = a + b;
    PosteriorPoint {
        mean: a / total,
        variance: a * b / (total * total * (1.0 + total)),
    }
}

/// Cumulative posterior statistics of the recursion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectorState {
    k: u64,
    sum_alpha: f64,
    // Neumaier compensation term for `sum_alpha`.
    alpha_comp: f64,
    sum_y: u64,
    trajectory: Vec<PosteriorPoint>,
}

impl DetectorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(stages: usize) -> Self {
        Self {
            trajectory: Vec::with_capacity(stages),
            ..Self::default()
        }
    }

    /// Consumes one indicator and appends the stage posterior.
    pub fn step(&mut self, y: bool) -> PosteriorPoint {
        self.k += 1;
        let kf = self.k as f64;
        let term = 1.0 / (kf * kf);
        let t = self.sum_alpha + term;
        if self.sum_alpha.abs() >= term {
            self.alpha_comp += (self.sum_alpha - t) + term;
        } else {
            self.alpha_comp += (term - t) + self.sum_alpha;
        }
        self.sum_alpha = t;
        self.sum_y += u64::from(y);
        let point = beta_moments(self.k, self.sum_alpha(), self.sum_y);
        self.trajectory.push(point);
        point
    }

    pub fn stages(&self) -> u64 {
        self.k
    }

    /// `sum_{j<=k} 1/j^2`, compensated.
    pub fn sum_alpha(&self) -> f64 {
        self.sum_alpha + self.alpha_comp
    }

    pub fn sum_y(&self) -> u64 {
        self.sum_y
    }

    pub fn trajectory(&self) -> &[PosteriorPoint] {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Vec<PosteriorPoint> {
        self.trajectory
    }

    pub fn last(&self) -> Option<PosteriorPoint> {
        self.trajectory.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Convergent,
    Divergent,
    Inconclusive,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Convergent => "convergent",
            Label::Divergent => "divergent",
            Label::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "convergent" | "convergence" | "c" => Ok(Label::Convergent),
            "divergent" | "divergence" | "d" => Ok(Label::Divergent),
            "inconclusive" => Ok(Label::Inconclusive),
            other => Err(format!("unknown verdict label `{other}`")),
        }
    }
}

/// Cutoffs on the tail-window posterior mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub upper: f64,
    pub lower: f64,
    /// Fraction of the trajectory averaged for the tail mean.
    pub tail_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            upper: 0.9,
            lower: 0.1,
            tail_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub final_mean: f64,
    pub tail_mean: f64,
}

/// Classifies a non-empty trajectory by the mean of its last
/// `ceil(tail_fraction * K)` posterior means.
///
/// # Panics
///
/// Panics on an empty trajectory.
pub fn classify(trajectory: &[PosteriorPoint], thresholds: &Thresholds) -> Verdict {
    assert!(
        !trajectory.is_empty(),
        "cannot classify an empty trajectory"
    );
    let k = trajectory.len();
    let window = ((thresholds.tail_fraction * k as f64).ceil() as usize).clamp(1, k);
    let tail = &trajectory[k - window..];
    let tail_mean = tail.iter().map(|p| p.mean).sum::<f64>() / window as f64;
    let label = if tail_mean >= thresholds.upper {
        Label::Convergent
    } else if tail_mean <= thresholds.lower {
        Label::Divergent
    } else {
        Label::Inconclusive
    };
    Verdict {
        label,
        final_mean: trajectory[k - 1].mean,
        tail_mean,
    }
}
