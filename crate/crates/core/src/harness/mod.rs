//! Experiment plans, the plan runner, figure manifests and calibration.

pub mod calibrate;
pub mod plan;
pub mod replicate;
pub mod run;
pub mod svg;

pub use calibrate::{calibrate_c1, Calibration, CalibrationConfig, CalibrationError};
pub use plan::{BoundKind, ExperimentPlan, FamilyName, PlanError};
pub use replicate::{replicate, Figure, ReplicateOptions, Replication};
pub use run::{execute, run_plan, with_workers, HarnessError, PlanOutcome};
