//! Named figure manifests: a shared plan plus per-panel overrides.

use super::plan::{ExperimentPlan, PlanError};
use super::run::{io_err, run_plan, HarnessError, PlanOutcome, VERDICT_HEADER};
use crate::oracle::OracleLabel;
use std::fs;
use std::io::Write;
use std::path::Path;

/// `(figure id, manifest)` for every shipped figure.
pub const FIGURES: &[(&str, &str)] = &[
    ("example_exp", include_str!("../../plans/example_exp.toml")),
    (
        "example_normal",
        include_str!("../../plans/example_normal.toml"),
    ),
    (
        "example_normal_dependent",
        include_str!("../../plans/example_normal_dependent.toml"),
    ),
    ("example_ss", include_str!("../../plans/example_ss.toml")),
    (
        "example_ssp2",
        include_str!("../../plans/example_ssp2.toml"),
    ),
    ("ds_para", include_str!("../../plans/ds_para.toml")),
    (
        "example_exp2",
        include_str!("../../plans/example_exp2.toml"),
    ),
    (
        "example_normal2",
        include_str!("../../plans/example_normal2.toml"),
    ),
    (
        "example_normal_dependent2",
        include_str!("../../plans/example_normal_dependent2.toml"),
    ),
    ("example_ss3", include_str!("../../plans/example_ss3.toml")),
    ("example_ss4", include_str!("../../plans/example_ss4.toml")),
    ("ds", include_str!("../../plans/ds.toml")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub id: String,
    pub title: String,
    /// Full-scale runs that take hours; excluded from the test suite.
    pub heavy: bool,
    pub panels: Vec<(String, ExperimentPlan)>,
}

impl Figure {
    /// Parses a manifest: top-level plan keys shared by all `[[panel]]`
    /// tables, each of which needs an `id` and may override any key.
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let parse = |m: String| PlanError::Parse(m);
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse(e.to_string()))?;
        let take_str = |t: &mut toml::Table, key: &str| -> Result<String, PlanError> {
            match t.remove(key) {
                Some(toml::Value::String(s)) => Ok(s),
                _ => Err(parse(format!("missing string key `{key}`"))),
            }
        };
        let id = take_str(&mut table, "figure")?;
        let title = take_str(&mut table, "title").unwrap_or_else(|_| id.clone());
        let heavy = matches!(table.remove("heavy"), Some(toml::Value::Boolean(true)));
        let panels = match table.remove("panel") {
            Some(toml::Value::Array(a)) => a,
            _ => return Err(parse(format!("figure `{id}` has no [[panel]] entries"))),
        };
        let mut out = Vec::with_capacity(panels.len());
        for panel in panels {
            let toml::Value::Table(mut overrides) = panel else {
                return Err(parse("panel must be a table".into()));
            };
            let panel_id = take_str(&mut overrides, "id")?;
            let mut merged = table.clone();
            merged.extend(overrides);
            merged.insert("id".into(), toml::Value::String(format!("{id}_{panel_id}")));
            let plan = ExperimentPlan::from_toml(
                &toml::to_string(&merged).map_err(|e| parse(e.to_string()))?,
            )?;
            out.push((panel_id, plan));
        }
        Ok(Self {
            id,
            title,
            heavy,
            panels: out,
        })
    }

    /// A shipped figure by id.
    pub fn named(id: &str) -> Result<Self, PlanError> {
        let (_, text) = FIGURES
            .iter()
            .find(|(name, _)| *name == id)
            .ok_or_else(|| {
                PlanError::Parse(format!(
                    "unknown figure `{id}`; known: {}",
                    figure_ids().join(", ")
                ))
            })?;
        Self::parse(text)
    }
}

pub fn figure_ids() -> Vec<&'static str> {
    FIGURES.iter().map(|(id, _)| *id).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplicateOptions {
    pub workers: Option<usize>,
    pub scale: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PanelResult {
    pub panel: String,
    pub expected: Option<OracleLabel>,
    pub outcome: PlanOutcome,
}

impl PanelResult {
    pub fn matches(&self) -> bool {
        self.outcome.matches_expected().unwrap_or(true)
    }
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub figure: String,
    pub panels: Vec<PanelResult>,
}

impl Replication {
    pub fn all_match(&self) -> bool {
        self.panels.iter().all(PanelResult::matches)
    }

    pub fn mismatches(&self) -> Vec<&PanelResult> {
        self.panels.iter().filter(|p| !p.matches()).collect()
    }
}

/// Runs every panel of `figure`; with an `out_dir`, writes per-panel
/// artifacts and a combined `<figure>.verdicts.csv`.
pub fn replicate(
    figure: &Figure,
    opts: ReplicateOptions,
    out_dir: Option<&Path>,
) -> Result<Replication, HarnessError> {
    let mut panels = Vec::with_capacity(figure.panels.len());
    for (panel, plan) in &figure.panels {
        let mut plan = match opts.scale {
            Some(f) => plan.scaled(f),
            None => plan.clone(),
        };
        if let Some(w) = opts.workers {
            plan.workers = w;
        }
        if let Some(dir) = out_dir {
            plan.out_dir = Some(dir.to_path_buf());
        }
        let outcome = run_plan(&plan)?;
        panels.push(PanelResult {
            panel: panel.clone(),
            expected: plan.expected,
            outcome,
        });
    }
    if let Some(dir) = out_dir {
        let path = dir.join(format!("{}.verdicts.csv", figure.id));
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        writeln!(f, "{VERDICT_HEADER}").map_err(io_err(&path))?;
        for p in &panels {
            writeln!(f, "{}", p.outcome.verdict_row()).map_err(io_err(&path))?;
        }
    }
    Ok(Replication {
        figure: figure.id.clone(),
        panels,
    })
}
