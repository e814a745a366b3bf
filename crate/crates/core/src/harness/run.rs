//! Executes plans and writes their artifacts.

use super::plan::{ClimateSourceName, ExperimentPlan, FamilyName, PlanError};
use super::svg::trajectory_svg;
use crate::climate::{self, ClimateError};
use crate::detector::{fmt_decimal, run_detector, DetectorError, DetectorRun};
use crate::oracle::{classify_family, OracleVerdict};
use crate::posterior::Thresholds;
use crate::series::{SeriesStream, VecSource};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Climate(#[from] ClimateError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("cannot build a pool of {workers} workers: {message}")]
    Pool { workers: usize, message: String },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Files written for one plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub trajectory: PathBuf,
    pub svg: PathBuf,
    pub verdict: PathBuf,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: ExperimentPlan,
    pub run: DetectorRun,
    pub oracle: Option<OracleVerdict>,
    pub artifacts: Option<Artifacts>,
}

impl PlanOutcome {
    /// Whether the detector verdict equals the plan's `expected` label
    /// (`None` when the plan has no expectation).
    pub fn matches_expected(&self) -> Option<bool> {
        self.plan.expected.map(|e| e == self.run.verdict.label)
    }

    pub fn verdict_row(&self) -> String {
        verdict_row(&self.plan, &self.run)
    }
}

pub const VERDICT_HEADER: &str = "plan_id,family,params,verdict,tail_mean";

/// `plan_id,family,params,verdict,tail_mean`.
pub fn verdict_row(plan: &ExperimentPlan, run: &DetectorRun) -> String {
    let (family, params) = match plan.series_spec() {
        Ok(spec) => (spec.family.name().to_string(), spec.family.params()),
        Err(_) => (
            "climate".to_string(),
            format!(
                "source={:?};theta0={};c1={}",
                plan.source,
                plan.theta0.unwrap_or(f64::NAN),
                plan.c1.unwrap_or(f64::NAN)
            )
            .to_lowercase(),
        ),
    };
    format!(
        "{},{},{},{},{}",
        plan.id,
        family,
        params,
        run.verdict.label,
        fmt_decimal(run.verdict.tail_mean)
    )
}

/// Runs `f` on a dedicated pool of exactly `workers` threads.
pub fn with_workers<T: Send>(
    workers: usize,
    f: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Pool {
            workers,
            message: e.to_string(),
        })?;
    Ok(pool.install(f))
}

/// Runs the detector for a plan without touching the disk.
pub fn execute(plan: &ExperimentPlan) -> Result<DetectorRun, HarnessError> {
    plan.validate()?;
    let cfg = plan.stage_config()?;
    let thresholds = Thresholds::default();
    let mut bound = plan.bound_strategy()?;
    if plan.family == FamilyName::Climate {
        let values = climate_summands(plan)?;
        let mut source = VecSource::new(values);
        return with_workers(plan.workers, || {
            run_detector(&mut source, &mut bound, &cfg, &thresholds)
        })?
        .map_err(Into::into);
    }
    let mut stream = SeriesStream::new(plan.series_spec()?);
    with_workers(plan.workers, || {
        run_detector(&mut stream, &mut bound, &cfg, &thresholds)
    })?
    .map_err(Into::into)
}

fn climate_summands(plan: &ExperimentPlan) -> Result<Vec<f64>, HarnessError> {
    let dir = plan.data_dir.as_deref().expect("validated");
    let series = match plan.source.expect("validated") {
        ClimateSourceName::Hadcrut => climate::hadcrut_from_dir(dir)?,
        ClimateSourceName::Holocene => climate::holocene_from_dir(
            dir,
            plan.holocene_method()?,
            plan.offset.unwrap_or(climate::ANOMALY_OFFSET),
        )?,
    };
    Ok(climate::transform(
        &series,
        plan.theta0.expect("validated"),
    )?)
}

/// Runs a plan and, when it has an `out_dir`, writes
/// `<id>.trajectory.csv`, `<id>.svg` and `<id>.verdict.csv` there.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutcome, HarnessError> {
    let run = execute(plan)?;
    let oracle = plan
        .series_spec()
        .ok()
        .and_then(|s| classify_family(&s).ok());
    let artifacts = match &plan.out_dir {
        Some(dir) => Some(write_artifacts(plan, &run, dir)?),
        None => None,
    };
    Ok(PlanOutcome {
        plan: plan.clone(),
        run,
        oracle,
        artifacts,
    })
}

pub fn write_artifacts(
    plan: &ExperimentPlan,
    run: &DetectorRun,
    dir: &Path,
) -> Result<Artifacts, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let trajectory = dir.join(format!("{}.trajectory.csv", plan.id));
    let svg = dir.join(format!("{}.svg", plan.id));
    let verdict = dir.join(format!("{}.verdict.csv", plan.id));

    let mut buf = Vec::with_capacity(run.records.len() * 100);
    run.write_csv(&mut buf).map_err(io_err(&trajectory))?;
    fs::write(&trajectory, buf).map_err(io_err(&trajectory))?;

    let means: Vec<f64> = run.posterior_means().collect();
    let t = Thresholds::default();
    let title = format!("{} ({})", plan.id, run.verdict.label);
    fs::write(&svg, trajectory_svg(&title, &means, t.upper, t.lower)).map_err(io_err(&svg))?;

    let mut f = fs::File::create(&verdict).map_err(io_err(&verdict))?;
    writeln!(f, "{VERDICT_HEADER}\n{}", verdict_row(plan, run)).map_err(io_err(&verdict))?;
    Ok(Artifacts {
        trajectory,
        svg,
        verdict,
    })
}
