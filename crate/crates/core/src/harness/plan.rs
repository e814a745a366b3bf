//! Flat experiment configuration.
//!
//! A plan is a flat TOML table:
//!
//! ```toml
//! id = "exp-p2"
//! family = "hier-exp"        # hier-exp | hier-normal | dep-normal | ss-exp
//!                            # | ss-hier-exp | rds | det-dirichlet | climate
//! p = 2.0                    # power-law schedule i^-p (or q = 1.5 for q^-i)
//! seed = 42
//! bound = "valid-scale"      # valid-scale | general-parametric | nonparametric
//! epsilon = 0.001
//! n_j = 1000
//! k = 2000
//! workers = 1
//! expected = "convergent"    # optional
//! ```
//!
//! Normal families take the variance schedule from `vartheta_p` /
//! `vartheta_q` and default to the mean schedule. Climate plans name a
//! `source`, `data_dir`, optional `method`, and `theta0`.

use crate::bounds::{
    BoundStrategy, CouplingVariant, GeneralBoundState, ScaleCouplingState, Surrogate, DEFAULT_STEP,
};
use crate::climate::HoloceneMethod;
use crate::oracle::OracleLabel;
use crate::posterior::{ConfigError, StageConfig};
use crate::series::{Family, ParamSchedule, SeriesSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("plan `{id}`: {message}")]
    Invalid { id: String, message: String },
    #[error("cannot parse plan: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    HierExp,
    HierNormal,
    DepNormal,
    SsExp,
    SsHierExp,
    Rds,
    DetDirichlet,
    Climate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    ValidScale,
    GeneralParametric,
    Nonparametric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    #[default]
    Coupled,
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClimateSourceName {
    Hadcrut,
    Holocene,
}

fn default_seed() -> u64 {
    1
}
fn default_eps() -> f64 {
    0.001
}
fn default_step() -> f64 {
    DEFAULT_STEP
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub id: String,
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vartheta_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vartheta_q: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub epsilon_prime: f64,
    pub bound: BoundKind,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub rds_signs: SignMode,
    pub n_j: usize,
    pub k: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<OracleLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ClimateSourceName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

impl ExperimentPlan {
    /// Minimal plan with defaults for everything but the essentials.
    pub fn new(id: &str, family: FamilyName, bound: BoundKind, n_j: usize, k: usize) -> Self {
        Self {
            id: id.to_string(),
            family,
            p: None,
            q: None,
            vartheta_p: None,
            vartheta_q: None,
            seed: default_seed(),
            epsilon_prime: default_eps(),
            bound,
            epsilon: default_eps(),
            a: None,
            c1: None,
            step: DEFAULT_STEP,
            rds_signs: SignMode::Coupled,
            n_j,
            k,
            workers: 1,
            out_dir: None,
            expected: None,
            source: None,
            data_dir: None,
            method: None,
            theta0: None,
            offset: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PlanError> {
        let plan = Self::parse(text)?;
        plan.validate()?;
        Ok(plan)
    }

    /// Parses without validating, for callers that still apply overrides.
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        toml::from_str(text).map_err(|e| PlanError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plans serialize")
    }

    fn invalid(&self, message: impl Into<String>) -> PlanError {
        PlanError::Invalid {
            id: self.id.clone(),
            message: message.into(),
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.id.is_empty() || self.id.contains(['/', '\\', ',']) {
            return Err(self.invalid("id must be non-empty without path separators or commas"));
        }
        if self.workers == 0 {
            return Err(self.invalid("workers must be positive"));
        }
        self.stage_config()?;
        if !(self.epsilon > 0.0) {
            return Err(self.invalid("epsilon must be positive"));
        }
        if self.family == FamilyName::Climate {
            if self.source.is_none() || self.data_dir.is_none() || self.theta0.is_none() {
                return Err(self.invalid("climate plans need source, data_dir and theta0"));
            }
            if self.bound != BoundKind::Nonparametric {
                return Err(self.invalid("climate plans use the nonparametric bound"));
            }
        } else {
            self.series_spec()?;
        }
        match self.bound {
            BoundKind::ValidScale => {
                self.coupling_variant()?;
            }
            BoundKind::GeneralParametric => {
                if !matches!(
                    self.family,
                    FamilyName::HierNormal | FamilyName::DepNormal | FamilyName::Rds
                ) {
                    return Err(self.invalid("general-parametric needs a normal or rds family"));
                }
                if self.inflation() <= 0.0 {
                    return Err(self.invalid("inflation a must be positive"));
                }
            }
            BoundKind::Nonparametric => {
                if !self.c1.is_some_and(|c| c.is_finite()) {
                    return Err(self.invalid("nonparametric bound needs c1"));
                }
                if !(self.step > 0.0) {
                    return Err(self.invalid("step must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn stage_config(&self) -> Result<StageConfig, PlanError> {
        StageConfig::new(self.n_j, self.k).map_err(|ConfigError(m)| self.invalid(m))
    }

    fn schedule(
        &self,
        p: Option<f64>,
        q: Option<f64>,
        what: &str,
    ) -> Result<ParamSchedule, PlanError> {
        let s = match (p, q) {
            (Some(p), None) => ParamSchedule::PowerLaw(p),
            (None, Some(q)) => ParamSchedule::Geometric(q),
            _ => return Err(self.invalid(format!("{what}: give exactly one of p or q"))),
        };
        if !s.is_valid() {
            return Err(self.invalid(format!("{what}: invalid schedule {s}")));
        }
        Ok(s)
    }

    fn power(&self) -> Result<f64, PlanError> {
        self.p
            .filter(|p| p.is_finite())
            .ok_or_else(|| self.invalid("family needs p"))
    }

    pub fn series_spec(&self) -> Result<SeriesSpec, PlanError> {
        let main = || self.schedule(self.p, self.q, "schedule");
        let variance = || {
            if self.vartheta_p.is_none() && self.vartheta_q.is_none() {
                main()
            } else {
                self.schedule(self.vartheta_p, self.vartheta_q, "vartheta")
            }
        };
        let eps_prime = self.epsilon_prime;
        let family = match self.family {
            FamilyName::HierExp => Family::HierExponential { psi: main()? },
            FamilyName::HierNormal => Family::HierNormal {
                phi2: main()?,
                vartheta: variance()?,
            },
            FamilyName::DepNormal => Family::DepNormal {
                phi2: main()?,
                vartheta: variance()?,
            },
            FamilyName::SsExp => Family::StateSpaceExp {
                psi: main()?,
                eps_prime,
            },
            FamilyName::SsHierExp => Family::StateSpaceHierExp {
                psi: main()?,
                eps_prime,
            },
            FamilyName::Rds => Family::RandomDirichlet { p: self.power()? },
            FamilyName::DetDirichlet => Family::DeterministicDirichlet { p: self.power()? },
            FamilyName::Climate => return Err(self.invalid("climate plans have no series spec")),
        };
        if matches!(
            family,
            Family::StateSpaceExp { .. } | Family::StateSpaceHierExp { .. }
        ) && !(eps_prime >= 0.0)
        {
            return Err(self.invalid("epsilon_prime must be non-negative"));
        }
        Ok(SeriesSpec::new(family, self.seed))
    }

    fn coupling_variant(&self) -> Result<CouplingVariant, PlanError> {
        match self.family {
            FamilyName::HierExp => Ok(CouplingVariant::HierExponential),
            FamilyName::SsExp => Ok(CouplingVariant::StateSpaceExp),
            FamilyName::SsHierExp => Ok(CouplingVariant::StateSpaceHierExp),
            _ => Err(self.invalid("valid-scale needs a non-negative scale family")),
        }
    }

    /// `a`, defaulting to 1 for RDS and 0.1 otherwise.
    pub fn inflation(&self) -> f64 {
        self.a.unwrap_or(if self.family == FamilyName::Rds {
            1.0
        } else {
            0.1
        })
    }

    pub fn holocene_method(&self) -> Result<HoloceneMethod, PlanError> {
        self.method
            .as_deref()
            .unwrap_or("Average")
            .parse()
            .map_err(|e: crate::climate::ClimateError| self.invalid(e.to_string()))
    }

    /// Fresh bound state for this plan.
    pub fn bound_strategy(&self) -> Result<BoundStrategy, PlanError> {
        // Derived seeds: the bound streams use their own tags, so reusing the
        // experiment seed keeps them independent of the data.
        Ok(match self.bound {
            BoundKind::ValidScale => {
                let psi = self.schedule(self.p, self.q, "schedule")?;
                BoundStrategy::ValidScale(ScaleCouplingState::new(
                    psi,
                    self.epsilon,
                    self.coupling_variant()?,
                    self.seed,
                ))
            }
            BoundKind::GeneralParametric => {
                let surrogate = match (self.family, self.rds_signs) {
                    (FamilyName::Rds, SignMode::Coupled) => Surrogate::DirichletCoupled,
                    (FamilyName::Rds, SignMode::Fresh) => {
                        Surrogate::DirichletFresh { seed: self.seed }
                    }
                    _ => Surrogate::Normal { seed: self.seed },
                };
                BoundStrategy::GeneralParametric(GeneralBoundState::new(
                    self.inflation(),
                    self.epsilon,
                    surrogate,
                ))
            }
            BoundKind::Nonparametric => {
                let c1 = self
                    .c1
                    .ok_or_else(|| self.invalid("nonparametric bound needs c1"))?;
                BoundStrategy::nonparametric(c1, self.step)
            }
        })
    }

    /// Shrinks `n_j` and `K` by `factor` (at least one summand, ten stages).
    pub fn scaled(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let mut out = self.clone();
        out.n_j = self.n_j.div_ceil(factor).max(1);
        out.k = self.k.div_ceil(factor).max(10.min(self.k));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
id = "exp-p2"
family = "hier-exp"
p = 2.0
seed = 42
bound = "valid-scale"
n_j = 1000
k = 2000
expected = "convergent"
"#;

    #[test]
    fn parses_and_round_trips() {
        let plan = ExperimentPlan::from_toml(EXAMPLE).unwrap();
        assert_eq!(plan.family, FamilyName::HierExp);
        assert_eq!(plan.epsilon, 0.001);
        assert_eq!(plan.workers, 1);
        assert_eq!(plan.expected, Some(OracleLabel::Convergent));
        let again = ExperimentPlan::from_toml(&plan.to_toml()).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn rejects_bad_plans() {
        let bad = EXAMPLE.replace("valid-scale", "nonparametric");
        assert!(matches!(
            ExperimentPlan::from_toml(&bad),
            Err(PlanError::Invalid { .. })
        ));
        let bad = EXAMPLE.replace("hier-exp", "rds");
        assert!(ExperimentPlan::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("k = 2000", "k = 0");
        assert!(ExperimentPlan::from_toml(&bad).is_err());
        let bad = format!("{EXAMPLE}q = 1.5\n");
        assert!(ExperimentPlan::from_toml(&bad).is_err());
        let bad = format!("{EXAMPLE}colour = 1\n");
        assert!(matches!(
            ExperimentPlan::from_toml(&bad),
            Err(PlanError::Parse(_))
        ));
    }

    #[test]
    fn normal_variance_schedule_defaults_to_mean() {
        let mut plan = ExperimentPlan::new(
            "n",
            FamilyName::HierNormal,
            BoundKind::GeneralParametric,
            10,
            10,
        );
        plan.p = Some(2.0);
        let spec = plan.series_spec().unwrap();
        assert_eq!(
            spec.family,
            Family::HierNormal {
                phi2: ParamSchedule::PowerLaw(2.0),
                vartheta: ParamSchedule::PowerLaw(2.0)
            }
        );
        assert_eq!(plan.inflation(), 0.1);
        plan.vartheta_p = Some(0.5);
        assert!(matches!(
            plan.series_spec().unwrap().family,
            Family::HierNormal { vartheta: ParamSchedule::PowerLaw(v), .. } if v == 0.5
        ));
    }

    #[test]
    fn scaling() {
        let plan = ExperimentPlan::from_toml(EXAMPLE).unwrap();
        let s = plan.scaled(100);
        assert_eq!((s.n_j, s.k), (10, 20));
        let s = plan.scaled(1_000_000);
        assert_eq!((s.n_j, s.k), (1, 10));
        assert_eq!(plan.scaled(1), plan);
    }
}
