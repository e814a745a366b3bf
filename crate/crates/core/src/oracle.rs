//! Analytic convergence labels for the supported families.

use crate::series::{Family, ParamSchedule, SeriesSpec};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleLabel {
    Convergent,
    Divergent,
}

impl OracleLabel {
    fn from_bool(convergent: bool) -> Self {
        if convergent {
            OracleLabel::Convergent
        } else {
            OracleLabel::Divergent
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            OracleLabel::Convergent => "convergent",
            OracleLabel::Divergent => "divergent",
        }
    }
}

impl std::str::FromStr for OracleLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "convergent" | "c" => Ok(OracleLabel::Convergent),
            "divergent" | "d" => Ok(OracleLabel::Divergent),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

impl fmt::Display for OracleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl PartialEq<crate::posterior::Label> for OracleLabel {
    fn eq(&self, other: &crate::posterior::Label) -> bool {
        use crate::posterior::Label;
        matches!(
            (self, other),
            (OracleLabel::Convergent, Label::Convergent)
                | (OracleLabel::Divergent, Label::Divergent)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub label: OracleLabel,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("no analytic label for {0}")]
    Unsupported(String),
    #[error("truncated mean requires psi > 0 and R > 0 (got psi = {psi}, R = {r})")]
    Domain { psi: f64, r: f64 },
}

/// Whether `sum_i psi_i` is finite.
fn summable(s: &ParamSchedule) -> Result<bool, OracleError> {
    if !s.is_valid() {
        return Err(OracleError::Unsupported(format!("schedule {s}")));
    }
    Ok(match *s {
        ParamSchedule::PowerLaw(p) => p > 1.0,
        ParamSchedule::Geometric(q) => q > 1.0,
    })
}

/// Ground-truth label from the three-series theorem.
pub fn classify_family(spec: &SeriesSpec) -> Result<OracleVerdict, OracleError> {
    let (convergent, rationale) = match spec.family {
        Family::HierExponential { psi } => {
            let c = summable(&psi)?;
            (
                c,
                format!("three-series: sum psi_i {} for psi_i = {psi}", finite(c)),
            )
        }
        Family::StateSpaceExp { psi, .. } | Family::StateSpaceHierExp { psi, .. } => {
            let c = summable(&psi)?;
            (
                c,
                format!(
                    "bounded state-space factor; sum psi_i {} for psi_i = {psi}",
                    finite(c)
                ),
            )
        }
        Family::HierNormal { phi2, vartheta } | Family::DepNormal { phi2, vartheta } => {
            let means = summable(&phi2)?;
            let variances = summable(&vartheta)?;
            let dep = if matches!(spec.family, Family::DepNormal { .. }) {
                "; mixing over xi preserves the label"
            } else {
                ""
            };
            (
                means && variances,
                format!(
                    "sum mu_i needs sum phi_i^2 < inf ({}), sum sigma_i^2 needs sum vartheta_i < inf ({}){dep}",
                    finite(means),
                    finite(variances)
                ),
            )
        }
        Family::RandomDirichlet { p } => {
            if !p.is_finite() {
                return Err(OracleError::Unsupported(format!("rds p = {p}")));
            }
            (
                p > 0.5,
                format!("random signs: converges a.s. iff p > 1/2 (p = {p})"),
            )
        }
        Family::DeterministicDirichlet { p } => {
            if !p.is_finite() {
                return Err(OracleError::Unsupported(format!("dirichlet p = {p}")));
            }
            (
                2.0 * p > 1.0,
                format!("p-series with exponent 2p = {}", 2.0 * p),
            )
        }
    };
    Ok(OracleVerdict {
        label: OracleLabel::from_bool(convergent),
        rationale,
    })
}

fn finite(c: bool) -> &'static str {
    if c {
        "finite"
    } else {
        "infinite"
    }
}

/// `E[theta 1{theta < R}]` for `theta ~ Exp(mean psi)`:
/// `psi * (1 - exp(-R/psi) (1 + R/psi))`.
pub fn truncated_exp_mean(psi: f64, r: f64) -> Result<f64, OracleError> {
    if !(psi > 0.0 && r > 0.0) || !psi.is_finite() || r.is_nan() {
        return Err(OracleError::Domain { psi, r });
    }
    let x = r / psi;
    let factor = if x < 1e-3 {
        // 1 - e^-x (1 + x) = x^2/2 - x^3/3 + x^4/8 - ...
        x * x * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0)
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    };
    Ok(psi * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(f: Family) -> OracleLabel {
        classify_family(&SeriesSpec::new(f, 0)).unwrap().label
    }

    #[test]
    fn reference_examples() {
        use OracleLabel::*;
        assert_eq!(
            label(Family::HierExponential {
                psi: ParamSchedule::PowerLaw(2.0)
            }),
            Convergent
        );
        assert_eq!(label(Family::RandomDirichlet { p: 0.5 }), Divergent);
        assert_eq!(
            label(Family::HierNormal {
                phi2: ParamSchedule::PowerLaw(2.0),
                vartheta: ParamSchedule::PowerLaw(0.5)
            }),
            Divergent
        );
    }

    #[test]
    fn boundaries() {
        use OracleLabel::*;
        let hx = |p| Family::HierExponential {
            psi: ParamSchedule::PowerLaw(p),
        };
        assert_eq!(label(hx(1.0)), Divergent);
        assert_eq!(label(hx(1.001)), Convergent);
        assert_eq!(
            label(Family::HierExponential {
                psi: ParamSchedule::Geometric(1.0)
            }),
            Divergent
        );
        assert_eq!(
            label(Family::StateSpaceHierExp {
                psi: ParamSchedule::Geometric(1.5),
                eps_prime: 0.001
            }),
            Convergent
        );
        assert_eq!(label(Family::RandomDirichlet { p: 0.501 }), Convergent);
        assert_eq!(label(Family::DeterministicDirichlet { p: 0.5 }), Divergent);
        assert_eq!(
            label(Family::DeterministicDirichlet { p: 0.51 }),
            Convergent
        );
        // Both the mean variances and the variances must be summable.
        let dep = |a, b| Family::DepNormal {
            phi2: ParamSchedule::PowerLaw(a),
            vartheta: ParamSchedule::PowerLaw(b),
        };
        assert_eq!(label(dep(1.2, 1.2)), Convergent);
        assert_eq!(label(dep(0.6, 1.2)), Divergent);
        assert_eq!(label(dep(1.2, 1.0)), Divergent);
        let invalid = SeriesSpec::new(
            Family::HierExponential {
                psi: ParamSchedule::Geometric(-2.0),
            },
            0,
        );
        assert!(matches!(
            classify_family(&invalid),
            Err(OracleError::Unsupported(_))
        ));
    }

    #[test]
    fn truncated_mean_values() {
        let v = truncated_exp_mean(1.0, 1.0).unwrap();
        assert!((v - (1.0 - 2.0 / std::f64::consts::E)).abs() < 1e-15);
        assert!((v - 0.264241).abs() < 1e-6);
        assert!((truncated_exp_mean(1.0, 50.0).unwrap() - 1.0).abs() < 1e-15);
        let v = truncated_exp_mean(2.0, 1.0).unwrap();
        assert!((v - 2.0 * (1.0 - (-0.5f64).exp() * 1.5)).abs() < 1e-15);
        assert!((v - 0.180408).abs() < 1e-6);
        assert!(truncated_exp_mean(0.0, 1.0).is_err());
        assert!(truncated_exp_mean(1.0, -1.0).is_err());
    }

    #[test]
    fn truncated_mean_series_branch_is_continuous() {
        let psi = 1.0;
        let below = truncated_exp_mean(psi, 0.999_999e-3).unwrap();
        let above = truncated_exp_mean(psi, 1.000_001e-3).unwrap();
        assert!((above - below).abs() < 1e-11);
        assert!(truncated_exp_mean(1.0, 1e-9).unwrap() > 0.0);
    }
}
