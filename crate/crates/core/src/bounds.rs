//! Stage bounds `c_j` for the partial sums.
//!
//! Three strategies are provided:
//!
//! * [`ScaleCouplingState`]: quantile coupling for non-negative hierarchical
//!   scale families. The observed summand is mapped back to its uniform and
//!   pushed through the envelope distribution with rate `r_i(eps)`, so the
//!   surrogate partial sum dominates the observed one index by index.
//! * [`GeneralBoundState`]: `|S~_j| + a/j` where `S~_j` is the partial sum of
//!   an envelope surrogate series.
//! * [`NonparametricState`]: `max(C_j, 0) / ln(j+1)` with `C_j` moved by
//!   `+-step` according to the previous indicator.

use crate::reduce;
use crate::rng::{IndexRng, StreamTag};
use crate::series::ParamSchedule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundError {
    #[error("envelope rate requires i >= 1 and eps > 0 (got i = {index}, eps = {epsilon})")]
    Domain { index: u64, epsilon: f64 },
    #[error("valid scale bound requires non-negative summands; X_{index} = {value}")]
    NegativeSummand { index: u64, value: f64 },
}

/// `r_i(eps) = min(i^(1+eps), (1+eps)^i)`.
pub fn envelope_rate(index: u64, epsilon: f64) -> Result<f64, BoundError> {
    if index < 1 || !(epsilon > 0.0) {
        return Err(BoundError::Domain { index, epsilon });
    }
    Ok(rate(index, epsilon))
}

#[inline]
fn rate(index: u64, epsilon: f64) -> f64 {
    let i = index as f64;
    let poly = i.powf(1.0 + epsilon);
    let geom = (i * epsilon.ln_1p()).exp();
    poly.min(geom)
}

/// Which model the coupling inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingVariant {
    /// `X_i = -theta_i ln U_i`, `theta_i ~ Exp(mean psi_i)`.
    HierExponential,
    /// `Y_i = X*_i theta_i`, `theta_i ~ Exp(mean psi_i)`.
    StateSpaceExp,
    /// `Y_i = X*_i theta_i`, `theta_i ~ Exp(mean vartheta_i)`, `vartheta_i ~ Exp(mean psi_i)`.
    StateSpaceHierExp,
}

/// Quantile coupling bound for non-negative summands.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleCouplingState {
    pub psi: ParamSchedule,
    pub epsilon: f64,
    pub variant: CouplingVariant,
    /// Seed of the `U*_i` stream. Drawn under its own tag, so it is independent
    /// of the data stream even when the experiment seed is reused.
    pub seed: u64,
}

/// Scale parameters driven by one shared `U*_i`: the parameter draw for the
/// observed family and the envelope draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledScales {
    pub theta_psi: f64,
    pub theta_envelope: f64,
}

impl ScaleCouplingState {
    pub fn new(psi: ParamSchedule, epsilon: f64, variant: CouplingVariant, seed: u64) -> Self {
        Self {
            psi,
            epsilon,
            variant,
            seed,
        }
    }

    /// `theta_psi = -psi_i ln U*_i` and `theta~_i = -r_i(eps)^-1 ln U*_i`.
    #[inline]
    pub fn coupled_scales(&self, index: u64) -> CoupledScales {
        let log_u = IndexRng::new(self.seed, StreamTag::Coupling, index)
            .uniform()
            .ln();
        CoupledScales {
            theta_psi: -self.psi.value(index) * log_u,
            theta_envelope: -log_u / rate(index, self.epsilon),
        }
    }

    /// Surrogate summand dominating the observed `x` at `index`.
    #[inline]
    pub fn surrogate(&self, index: u64, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        match self.variant {
            CouplingVariant::HierExponential | CouplingVariant::StateSpaceHierExp => {
                // ln U_i = -x / theta_psi, then X~_i = -theta~_i ln U_i.
                let s = self.coupled_scales(index);
                x * (s.theta_envelope / s.theta_psi)
            }
            CouplingVariant::StateSpaceExp => {
                // ln U_i = -Y_i / (psi_i X*_i) and Y~_i = X*_i theta~_i; X*_i cancels.
                x / (rate(index, self.epsilon) * self.psi.value(index))
            }
        }
    }

    /// `c_j = sum of surrogates over the block` starting at global index `first`.
    pub fn stage_bound(&self, first: u64, block: &[f64]) -> Result<f64, BoundError> {
        if let Some(k) = block.iter().position(|&x| x < 0.0 || x.is_nan()) {
            return Err(BoundError::NegativeSummand {
                index: first + k as u64,
                value: block[k],
            });
        }
        Ok(reduce::ordered_sum_by(block.len(), |k| {
            self.surrogate(first + k as u64, block[k])
        }))
    }
}

/// Surrogate series used by the general bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Surrogate {
    /// `mu~_i ~ N(0, 1/r_i)`, `sigma~_i^2 ~ Exp(mean 1/r_i)`, `X~_i = mu~_i + sigma~_i Z~_i`.
    Normal { seed: u64 },
    /// `X~_i = s_i / i^(1+eps)` with the observed signs.
    DirichletCoupled,
    /// `X~_i = s~_i / i^(1+eps)` with fresh signs.
    DirichletFresh { seed: u64 },
}

/// `c_j = |S~_j| + a / j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralBoundState {
    pub inflation: f64,
    pub epsilon: f64,
    pub surrogate: Surrogate,
    /// `|S~_j|` of the most recent stage.
    pub last_surrogate_abs: f64,
}

impl GeneralBoundState {
    pub fn new(inflation: f64, epsilon: f64, surrogate: Surrogate) -> Self {
        Self {
            inflation,
            epsilon,
            surrogate,
            last_surrogate_abs: 0.0,
        }
    }

    #[inline]
    fn surrogate_summand(&self, index: u64, observed: f64) -> f64 {
        let r = rate(index, self.epsilon);
        match self.surrogate {
            Surrogate::Normal { seed } => {
                let mut rng = IndexRng::new(seed, StreamTag::Surrogate, index);
                let mu = rng.std_normal() / r.sqrt();
                let sigma2 = rng.exponential(1.0 / r);
                mu + sigma2.sqrt() * rng.std_normal()
            }
            Surrogate::DirichletCoupled => {
                let s = if observed < 0.0 { -1.0 } else { 1.0 };
                s * (index as f64).powf(-(1.0 + self.epsilon))
            }
            Surrogate::DirichletFresh { seed } => {
                IndexRng::new(seed, StreamTag::Surrogate, index).sign()
                    * (index as f64).powf(-(1.0 + self.epsilon))
            }
        }
    }

    pub fn stage_bound(&mut self, stage: usize, first: u64, block: &[f64]) -> f64 {
        let s = reduce::ordered_sum_by(block.len(), |k| {
            self.surrogate_summand(first + k as u64, block[k])
        });
        self.last_surrogate_abs = s.abs();
        general_bound(stage, self.last_surrogate_abs, self.inflation)
    }
}

/// `|S~_j| + a/j`.
pub fn general_bound(stage: usize, surrogate_abs: f64, inflation: f64) -> f64 {
    surrogate_abs + inflation / stage as f64
}

/// Adaptive bound state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonparametricState {
    /// `C_j` before clamping; may go negative.
    pub c_hat: f64,
    pub c1: f64,
    pub step: f64,
    /// Last stage served, 0 before the first call.
    pub stage: usize,
}

pub const DEFAULT_STEP: f64 = 0.05;

impl NonparametricState {
    pub fn new(c1: f64, step: f64) -> Self {
        Self {
            c_hat: c1,
            c1,
            step,
            stage: 0,
        }
    }

    /// Advances to the next stage. `prev_y` is the indicator of the previous
    /// stage and must be `None` exactly at the first stage.
    pub fn next(self, prev_y: Option<bool>) -> (f64, Self) {
        let stage = self.stage + 1;
        let c_hat = match prev_y {
            None => self.c1,
            Some(true) => self.c_hat + self.step,
            Some(false) => self.c_hat - self.step,
        };
        let state = Self {
            c_hat,
            stage,
            ..self
        };
        (nonparametric_bound(stage, c_hat), state)
    }
}

/// `max(C_j, 0) / ln(j + 1)`.
pub fn nonparametric_bound(stage: usize, c_hat: f64) -> f64 {
    c_hat.max(0.0) / ((stage + 1) as f64).ln()
}

/// The three bound families behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundStrategy {
    ValidScale(ScaleCouplingState),
    GeneralParametric(GeneralBoundState),
    Nonparametric {
        state: NonparametricState,
        prev_y: Option<bool>,
    },
}

impl BoundStrategy {
    pub fn nonparametric(c1: f64, step: f64) -> Self {
        BoundStrategy::Nonparametric {
            state: NonparametricState::new(c1, step),
            prev_y: None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BoundStrategy::ValidScale(_) => "valid-scale",
            BoundStrategy::GeneralParametric(_) => "general-parametric",
            BoundStrategy::Nonparametric { .. } => "nonparametric",
        }
    }

    /// Bound for 1-based `stage` whose summands start at global index `first`.
    pub fn stage_bound(
        &mut self,
        stage: usize,
        first: u64,
        block: &[f64],
    ) -> Result<f64, BoundError> {
        match self {
            BoundStrategy::ValidScale(s) => s.stage_bound(first, block),
            BoundStrategy::GeneralParametric(s) => Ok(s.stage_bound(stage, first, block)),
            BoundStrategy::Nonparametric { state, prev_y } => {
                let (c, next) = state.next(*prev_y);
                *state = next;
                Ok(c)
            }
        }
    }

    /// Feeds back the indicator of the stage just bounded.
    pub fn observe(&mut self, y: bool) {
        if let BoundStrategy::Nonparametric { prev_y, .. } = self {
            *prev_y = Some(y);
        }
    }
}
