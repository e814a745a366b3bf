//! Temperature records as random series.
//!
//! A record `X_t` (absolute degrees Celsius) is turned into summands
//! `Y_t = ln(ln X_t) - ln(ln theta0)` and tested for convergence with the
//! nonparametric bound over a grid of `theta0` and initial constants.
//!
//! Input layouts:
//!
//! * Monthly anomaly files (HadCRUT4 best estimate and each ensemble
//!   realisation): one row per month, first field `YYYY/MM` (or `YYYY-MM`),
//!   second field the anomaly in degrees C; fields separated by whitespace or
//!   commas; further fields ignored; `#` starts a comment; one optional header
//!   line.
//! * Holocene reconstructions: CSV with a header naming an `age` column
//!   (years before present) and method columns `CPS,DCC,GAM,PAI,SCC`, plus an
//!   optional `Average` column (otherwise the mean of the five). One row per
//!   century from age 0 to 12000.

use crate::detector::{fmt_decimal, run_nonparametric_on_sums};
use crate::posterior::{Label, StageConfig, Thresholds};
use crate::reduce;
use rayon::prelude::*;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Offset converting 1961-1990 anomalies to absolute temperature.
pub const ANOMALY_OFFSET: f64 = 14.0;
pub const HADCRUT_FIRST_YEAR: i32 = 1850;
pub const HADCRUT_LAST_YEAR: i32 = 2016;
pub const HADCRUT_MEMBERS: usize = 100;
pub const HADCRUT_LEN: usize = 167 * 12 * HADCRUT_MEMBERS;
pub const HOLOCENE_SPAN_YEARS: u32 = 12_000;
pub const HOLOCENE_KNOT_YEARS: u32 = 100;
pub const MONTHS_PER_KNOT: usize = 1200;
pub const HOLOCENE_LEN: usize =
    (HOLOCENE_SPAN_YEARS / HOLOCENE_KNOT_YEARS) as usize * MONTHS_PER_KNOT;

#[derive(Debug, thiserror::Error)]
pub enum ClimateError {
    #[error("{path}: line {line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("temperature {value} at position {position} is not above 1 degree C")]
    Range { position: usize, value: f64 },
    #[error("unknown reconstruction method `{0}`")]
    MethodUnknown(String),
    #[error("log-log transform undefined for X = {x}, theta0 = {theta0}")]
    Domain { x: f64, theta0: f64 },
    #[error("series has {available} values, sweep needs {needed}")]
    StreamExhausted { needed: usize, available: usize },
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HoloceneMethod {
    Cps,
    Dcc,
    Gam,
    Pai,
    Scc,
    Average,
}

impl HoloceneMethod {
    pub const ALL: [HoloceneMethod; 6] = [
        HoloceneMethod::Cps,
        HoloceneMethod::Dcc,
        HoloceneMethod::Gam,
        HoloceneMethod::Pai,
        HoloceneMethod::Scc,
        HoloceneMethod::Average,
    ];

    pub fn column(&self) -> &'static str {
        match self {
            HoloceneMethod::Cps => "CPS",
            HoloceneMethod::Dcc => "DCC",
            HoloceneMethod::Gam => "GAM",
            HoloceneMethod::Pai => "PAI",
            HoloceneMethod::Scc => "SCC",
            HoloceneMethod::Average => "Average",
        }
    }
}

impl fmt::Display for HoloceneMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for HoloceneMethod {
    type Err = ClimateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HoloceneMethod::ALL
            .into_iter()
            .find(|m| m.column().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ClimateError::MethodUnknown(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClimateSource {
    HadCrut4Amalgam,
    Holocene(HoloceneMethod),
}

impl fmt::Display for ClimateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClimateSource::HadCrut4Amalgam => f.write_str("hadcrut4-amalgam"),
            ClimateSource::Holocene(m) => write!(f, "holocene-{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    Forward,
    ReversedPast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClimateSeries {
    pub source: ClimateSource,
    pub values: Vec<f64>,
    pub direction: TimeDirection,
}

impl ClimateSeries {
    /// Wraps values after checking that every temperature exceeds 1 degree C.
    pub fn new(
        source: ClimateSource,
        values: Vec<f64>,
        direction: TimeDirection,
    ) -> Result<Self, ClimateError> {
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, &v)| !(v > 1.0)) {
            return Err(ClimateError::Range { position, value });
        }
        Ok(Self {
            source,
            values,
            direction,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn read(path: &Path) -> Result<String, ClimateError> {
    std::fs::read_to_string(path).map_err(|source| ClimateError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_month(token: &str) -> Option<(i32, u32)> {
    let (y, m) = token.split_once(['/', '-'])?;
    let year = y.trim().parse().ok()?;
    let month: u32 = m.trim().parse().ok()?;
    (1..=12).contains(&month).then_some((year, month))
}

/// Monthly `(year, month, anomaly)` rows of one anomaly file.
pub fn parse_monthly(text: &str, path: &str) -> Result<Vec<(i32, u32, f64)>, ClimateError> {
    let mut rows = Vec::new();
    let mut seen_data = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty());
        let first = fields.next().unwrap_or("");
        let Some((year, month)) = parse_month(first) else {
            if !seen_data && rows.is_empty() && n == first_content_line(text) {
                continue; // header
            }
            return Err(ClimateError::Schema {
                path: path.to_string(),
                line: n + 1,
                message: format!("expected YYYY/MM date, found `{first}`"),
            });
        };
        seen_data = true;
        let value = fields
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| ClimateError::Schema {
                path: path.to_string(),
                line: n + 1,
                message: "missing or non-numeric anomaly".into(),
            })?;
        rows.push((year, month, value));
    }
    Ok(rows)
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| !l.split('#').next().unwrap_or("").trim().is_empty())
        .unwrap_or(0)
}

/// Anomalies for every month of 1850-2016, in calendar order.
fn monthly_window(path: &Path) -> Result<Vec<f64>, ClimateError> {
    let name = path.display().to_string();
    let rows = parse_monthly(&read(path)?, &name)?;
    let months = ((HADCRUT_LAST_YEAR - HADCRUT_FIRST_YEAR + 1) * 12) as usize;
    let mut out = vec![f64::NAN; months];
    for (year, month, v) in rows {
        if !(HADCRUT_FIRST_YEAR..=HADCRUT_LAST_YEAR).contains(&year) {
            continue;
        }
        let slot = ((year - HADCRUT_FIRST_YEAR) * 12) as usize + month as usize - 1;
        out[slot] = v;
    }
    if let Some(missing) = out.iter().position(|v| v.is_nan()) {
        return Err(ClimateError::Schema {
            path: name,
            line: 0,
            message: format!(
                "no value for {}/{:02}",
                HADCRUT_FIRST_YEAR + (missing / 12) as i32,
                missing % 12 + 1
            ),
        });
    }
    Ok(out)
}

/// Builds the month-major, member-minor amalgam of the HadCRUT4 ensemble.
///
/// The best-estimate file fixes the calendar and is validated for coverage;
/// the emitted values are the 100 realisations of each month, offset by
/// +14 degrees C, in the order the files are given.
pub fn ingest_hadcrut(
    anomaly_file: &Path,
    ensemble_files: &[PathBuf],
) -> Result<ClimateSeries, ClimateError> {
    if ensemble_files.len() != HADCRUT_MEMBERS {
        return Err(ClimateError::Schema {
            path: anomaly_file.display().to_string(),
            line: 0,
            message: format!(
                "expected {HADCRUT_MEMBERS} ensemble files, got {}",
                ensemble_files.len()
            ),
        });
    }
    let best = monthly_window(anomaly_file)?;
    let members: Vec<Vec<f64>> = ensemble_files
        .iter()
        .map(|p| monthly_window(p))
        .collect::<Result<_, _>>()?;
    let mut values = Vec::with_capacity(best.len() * HADCRUT_MEMBERS);
    for month in 0..best.len() {
        values.extend(members.iter().map(|m| m[month] + ANOMALY_OFFSET));
    }
    ClimateSeries::new(
        ClimateSource::HadCrut4Amalgam,
        values,
        TimeDirection::Forward,
    )
}

/// Century knots `(age, value)` for one method, sorted by age.
pub fn parse_holocene(
    text: &str,
    path: &str,
    method: HoloceneMethod,
) -> Result<Vec<(f64, f64)>, ClimateError> {
    let schema = |line: usize, message: String| ClimateError::Schema {
        path: path.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| schema(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| c.eq_ignore_ascii_case(name));
    let age_col = find("age").ok_or_else(|| schema(hline, "no `age` column".into()))?;
    let value_cols: Vec<usize> = match (method, find(method.column())) {
        (_, Some(c)) => vec![c],
        (HoloceneMethod::Average, None) => HoloceneMethod::ALL[..5]
            .iter()
            .map(|m| find(m.column()).ok_or_else(|| schema(hline, format!("no `{m}` column"))))
            .collect::<Result<_, _>>()?,
        (m, None) => return Err(schema(hline, format!("no `{m}` column"))),
    };
    let mut knots = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |c: usize| -> Result<f64, ClimateError> {
            fields
                .get(c)
                .and_then(|f| f.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| schema(n, format!("column {} is missing or non-numeric", c + 1)))
        };
        let age = num(age_col)?;
        let mut sum = 0.0;
        for &c in &value_cols {
            sum += num(c)?;
        }
        knots.push((age, sum / value_cols.len() as f64));
    }
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(knots)
}

/// Linear interpolation of century knots to months, nearest-present first.
///
/// Knot `k` (age `100 k`) lands exactly on position `1200 k`; the 120
/// intervals give 144,000 values. `offset` is added to every value (use 14
/// for anomaly reconstructions).
pub fn interpolate_monthly(knots: &[(f64, f64)], offset: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(HOLOCENE_LEN);
    for pair in knots.windows(2) {
        let (v0, v1) = (pair[0].1, pair[1].1);
        for m in 0..MONTHS_PER_KNOT {
            let w = m as f64 / MONTHS_PER_KNOT as f64;
            out.push(v0 + (v1 - v0) * w + offset);
        }
    }
    out
}

pub fn ingest_holocene(
    path: &Path,
    method: HoloceneMethod,
    offset: f64,
) -> Result<ClimateSeries, ClimateError> {
    let name = path.display().to_string();
    let knots = parse_holocene(&read(path)?, &name, method)?;
    holocene_from_knots(&knots, method, offset, &name)
}

pub fn holocene_from_knots(
    knots: &[(f64, f64)],
    method: HoloceneMethod,
    offset: f64,
    name: &str,
) -> Result<ClimateSeries, ClimateError> {
    let expected = (HOLOCENE_SPAN_YEARS / HOLOCENE_KNOT_YEARS) as usize + 1;
    let window: Vec<(f64, f64)> = knots
        .iter()
        .copied()
        .filter(|(age, _)| *age <= HOLOCENE_SPAN_YEARS as f64)
        .collect();
    let aligned = window.len() == expected
        && window
            .iter()
            .enumerate()
            .all(|(k, (age, _))| (*age - (k as u32 * HOLOCENE_KNOT_YEARS) as f64).abs() < 1e-6);
    if !aligned {
        return Err(ClimateError::Schema {
            path: name.to_string(),
            line: 0,
            message: format!(
                "need {expected} knots at ages 0, 100, ..., {HOLOCENE_SPAN_YEARS}; found {}",
                window.len()
            ),
        });
    }
    ClimateSeries::new(
        ClimateSource::Holocene(method),
        interpolate_monthly(&window, offset),
        TimeDirection::ReversedPast,
    )
}

/// Layout of a local data directory:
///
/// * `hadcrut/best.txt` — best-estimate monthly anomalies;
/// * `hadcrut/ensemble/*.txt` — the 100 realisations, ordered by the last
///   number in the file name;
/// * `holocene/reconstructions.csv` — century reconstructions.
pub fn hadcrut_from_dir(dir: &Path) -> Result<ClimateSeries, ClimateError> {
    let root = dir.join("hadcrut");
    let ens_dir = root.join("ensemble");
    let entries = std::fs::read_dir(&ens_dir).map_err(|source| ClimateError::Io {
        path: ens_dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort_by_key(|p| {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        (trailing_number(&stem), stem)
    });
    ingest_hadcrut(&root.join("best.txt"), &files)
}

fn trailing_number(s: &str) -> u64 {
    let digits: String = s
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits
        .chars()
        .rev()
        .collect::<String>()
        .parse()
        .unwrap_or(u64::MAX)
}

pub fn holocene_from_dir(
    dir: &Path,
    method: HoloceneMethod,
    offset: f64,
) -> Result<ClimateSeries, ClimateError> {
    ingest_holocene(
        &dir.join("holocene").join("reconstructions.csv"),
        method,
        offset,
    )
}

/// `ln(ln x) - ln(ln theta0)`.
#[inline]
pub fn loglog_difference(x: f64, theta0: f64) -> Result<f64, ClimateError> {
    if !(x > 1.0 && theta0 > 1.0) {
        return Err(ClimateError::Domain { x, theta0 });
    }
    Ok(x.ln().ln() - theta0.ln().ln())
}

/// Summands `Y_{theta0,t}` in series order.
pub fn transform(series: &ClimateSeries, theta0: f64) -> Result<Vec<f64>, ClimateError> {
    if !(theta0 > 1.0) {
        return Err(ClimateError::Domain {
            x: f64::NAN,
            theta0,
        });
    }
    let offset = theta0.ln().ln();
    series
        .values
        .iter()
        .map(|&x| {
            if x > 1.0 {
                Ok(x.ln().ln() - offset)
            } else {
                Err(ClimateError::Domain { x, theta0 })
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub lower: f64,
    pub upper: f64,
    pub grid_step: f64,
    pub c1_values: Vec<f64>,
    pub step: f64,
    pub stages: StageConfig,
    pub thresholds: Thresholds,
}

impl SweepConfig {
    /// 11..16 by 0.1 with initial constants 0.5, 1.0, ..., 9.5.
    pub fn standard(stages: StageConfig) -> Self {
        Self {
            lower: 11.0,
            upper: 16.0,
            grid_step: 0.1,
            c1_values: (1..20).map(|k| k as f64 * 0.5).collect(),
            step: crate::bounds::DEFAULT_STEP,
            stages,
            thresholds: Thresholds::default(),
        }
    }

    pub fn hadcrut() -> Self {
        Self::standard(StageConfig {
            stage_len: 1200,
            stages: 167,
        })
    }

    pub fn holocene() -> Self {
        Self::standard(StageConfig {
            stage_len: 1000,
            stages: 144,
        })
    }

    pub fn validate(&self) -> Result<(), ClimateError> {
        if !(self.lower < self.upper) {
            return Err(ClimateError::Config(
                "lower anchor must be below upper".into(),
            ));
        }
        if !(self.grid_step > 0.0) {
            return Err(ClimateError::Config("grid step must be positive".into()));
        }
        if self.c1_values.is_empty() {
            return Err(ClimateError::Config("no initial constants".into()));
        }
        Ok(())
    }

    /// `floor((U - L)/step) + 1` equidistant points starting at `L`.
    pub fn theta0_grid(&self) -> Vec<f64> {
        let n = ((self.upper - self.lower) / self.grid_step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| self.lower + k as f64 * self.grid_step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub theta0: f64,
    pub c1: f64,
    pub label: Label,
    pub tail_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub source: ClimateSource,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn all_divergent(&self) -> bool {
        self.cells.iter().all(|c| c.label == Label::Divergent)
    }

    pub fn all_convergent(&self) -> bool {
        self.cells.iter().all(|c| c.label == Label::Convergent)
    }

    pub fn count(&self, label: Label) -> usize {
        self.cells.iter().filter(|c| c.label == label).count()
    }

    pub fn summary(&self) -> String {
        format!(
            "source={} cells={} convergent={} divergent={} inconclusive={} all_divergent={}",
            self.source,
            self.cells.len(),
            self.count(Label::Convergent),
            self.count(Label::Divergent),
            self.count(Label::Inconclusive),
            self.all_divergent()
        )
    }

    /// `theta0,c1,verdict,tail_mean` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "theta0,c1,verdict,tail_mean")?;
        for c in &self.cells {
            writeln!(
                out,
                "{:.4},{:.4},{},{}",
                c.theta0,
                c.c1,
                c.label,
                fmt_decimal(c.tail_mean)
            )?;
        }
        Ok(())
    }
}

/// Runs every `(theta0, c1)` cell on `series`.
pub fn sweep(series: &ClimateSeries, cfg: &SweepConfig) -> Result<SweepReport, ClimateError> {
    cfg.validate()?;
    sweep_cells(series, &cfg.theta0_grid(), cfg)
}

/// As [`sweep`] over an explicit list of `theta0` values.
pub fn sweep_cells(
    series: &ClimateSeries,
    thetas: &[f64],
    cfg: &SweepConfig,
) -> Result<SweepReport, ClimateError> {
    let needed = cfg.stages.stage_len * cfg.stages.stages;
    if needed > series.len() {
        return Err(ClimateError::StreamExhausted {
            needed,
            available: series.len(),
        });
    }
    let per_theta: Vec<Vec<SweepCell>> = thetas
        .par_iter()
        .map(|&theta0| {
            let y = transform(series, theta0)?;
            let sums: Vec<f64> = y[..needed]
                .chunks(cfg.stages.stage_len)
                .map(reduce::ordered_sum)
                .collect();
            Ok(cfg
                .c1_values
                .iter()
                .map(|&c1| {
                    let run = run_nonparametric_on_sums(&sums, c1, cfg.step, &cfg.thresholds);
                    SweepCell {
                        theta0,
                        c1,
                        label: run.verdict.label,
                        tail_mean: run.verdict.tail_mean,
                    }
                })
                .collect())
        })
        .collect::<Result<_, ClimateError>>()?;
    Ok(SweepReport {
        source: series.source,
        cells: per_theta.into_iter().flatten().collect(),
    })
}
