use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serconv::climate::{self, HoloceneMethod, SweepConfig};
use serconv::harness::calibrate::{calibrate_c1, grid, CalibrationConfig};
use serconv::harness::plan::{BoundKind, ExperimentPlan, FamilyName, SignMode};
use serconv::harness::replicate::{figure_ids, replicate, Figure, ReplicateOptions};
use serconv::harness::run::{run_plan, with_workers, VERDICT_HEADER};
use serconv::oracle::classify_family;
use serconv::posterior::StageConfig;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

/// Bayesian convergence diagnostics for random infinite series.
#[derive(Parser, Debug)]
#[command(name = "serconv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment plan (from a config file and/or flags).
    Simulate(SimulateArgs),
    /// Sweep a temperature record over theta0 and C1.
    Climate(ClimateArgs),
    /// Print the analytic label of a series family.
    Oracle(SeriesArgs),
    /// Choose the nonparametric C1 on the deterministic Dirichlet proxy.
    Calibrate(CalibrateArgs),
    /// Run a figure manifest and compare verdicts with the expected labels.
    Replicate(ReplicateArgs),
}

#[derive(Args, Debug, Clone)]
struct SeriesArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Power-law exponent: psi_i = i^-p.
    #[arg(long)]
    p: Option<f64>,
    /// Geometric base: psi_i = q^-i.
    #[arg(long, conflicts_with = "p")]
    q: Option<f64>,
    #[arg(long)]
    vartheta_p: Option<f64>,
    #[arg(long, conflicts_with = "vartheta_p")]
    vartheta_q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon_prime: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Flat TOML plan; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long, value_enum)]
    bound: Option<BoundArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Inflation of the general bound.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, value_enum)]
    rds_signs: Option<SignArg>,
    #[arg(long)]
    n_j: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Divide n_j and K by this factor.
    #[arg(long)]
    scale: Option<usize>,
}

#[derive(Args, Debug)]
struct ClimateArgs {
    #[arg(long, value_enum)]
    source: SourceArg,
    /// Holocene reconstruction: CPS, DCC, GAM, PAI, SCC or Average.
    #[arg(long, default_value = "Average")]
    method: String,
    #[arg(long)]
    data_dir: PathBuf,
    /// Added to Holocene values (anomalies to absolute degrees C).
    #[arg(long, default_value_t = climate::ANOMALY_OFFSET)]
    offset: f64,
    #[arg(long)]
    n_j: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Sweep report CSV (theta0, c1, verdict, tail_mean).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 0.01)]
    c1_min: f64,
    #[arg(long, default_value_t = 2.0)]
    c1_max: f64,
    #[arg(long, default_value_t = 0.01)]
    c1_step: f64,
    #[arg(long, default_value_t = 1000)]
    n_j: usize,
    #[arg(long, default_value_t = 2000)]
    k: usize,
    /// Minimum agreement fraction.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    /// Figure id; `--list` shows the available ones.
    #[arg(required_unless_present = "list")]
    figure: Option<String>,
    #[arg(long)]
    list: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    scale: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FamilyArg {
    HierExp,
    HierNormal,
    DepNormal,
    SsExp,
    SsHierExp,
    Rds,
    DetDirichlet,
}

impl From<FamilyArg> for FamilyName {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::HierExp => FamilyName::HierExp,
            FamilyArg::HierNormal => FamilyName::HierNormal,
            FamilyArg::DepNormal => FamilyName::DepNormal,
            FamilyArg::SsExp => FamilyName::SsExp,
            FamilyArg::SsHierExp => FamilyName::SsHierExp,
            FamilyArg::Rds => FamilyName::Rds,
            FamilyArg::DetDirichlet => FamilyName::DetDirichlet,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BoundArg {
    ValidScale,
    GeneralParametric,
    Nonparametric,
}

impl From<BoundArg> for BoundKind {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::ValidScale => BoundKind::ValidScale,
            BoundArg::GeneralParametric => BoundKind::GeneralParametric,
            BoundArg::Nonparametric => BoundKind::Nonparametric,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SignArg {
    Coupled,
    Fresh,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum SourceArg {
    Hadcrut,
    Holocene,
}

fn apply_series(plan: &mut ExperimentPlan, s: &SeriesArgs) {
    if let Some(f) = s.family {
        plan.family = f.into();
    }
    if s.p.is_some() || s.q.is_some() {
        plan.p = s.p;
        plan.q = s.q;
    }
    if s.vartheta_p.is_some() || s.vartheta_q.is_some() {
        plan.vartheta_p = s.vartheta_p;
        plan.vartheta_q = s.vartheta_q;
    }
    if let Some(seed) = s.seed {
        plan.seed = seed;
    }
    if let Some(e) = s.epsilon_prime {
        plan.epsilon_prime = e;
    }
}

fn build_plan(args: &SimulateArgs) -> Result<ExperimentPlan> {
    let mut plan = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentPlan::parse(&text).with_context(|| format!("plan {}", path.display()))?
        }
        None => {
            let family = args
                .series
                .family
                .context("--family is required without --config")?;
            let bound = args.bound.context("--bound is required without --config")?;
            ExperimentPlan::new(
                "run",
                family.into(),
                bound.into(),
                args.n_j.context("--n-j is required without --config")?,
                args.k.context("--k is required without --config")?,
            )
        }
    };
    apply_series(&mut plan, &args.series);
    if let Some(id) = &args.id {
        plan.id = id.clone();
    }
    if let Some(b) = args.bound {
        plan.bound = b.into();
    }
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = args.$field.clone() { plan.$field = v; } )* };
    }
    set!(epsilon, step, n_j, k, workers);
    if args.a.is_some() {
        plan.a = args.a;
    }
    if args.c1.is_some() {
        plan.c1 = args.c1;
    }
    if let Some(s) = args.rds_signs {
        plan.rds_signs = match s {
            SignArg::Coupled => SignMode::Coupled,
            SignArg::Fresh => SignMode::Fresh,
        };
    }
    if args.out_dir.is_some() {
        plan.out_dir = args.out_dir.clone();
    }
    if let Some(f) = args.scale {
        plan = plan.scaled(f);
    }
    plan.validate()?;
    Ok(plan)
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let plan = build_plan(&args)?;
    let out = run_plan(&plan)?;
    println!("{VERDICT_HEADER}");
    println!("{}", out.verdict_row());
    if let Some(o) = &out.oracle {
        eprintln!("oracle: {} ({})", o.label, o.rationale);
    }
    if let Some(a) = &out.artifacts {
        eprintln!("wrote {}", a.trajectory.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn climate_cmd(args: ClimateArgs) -> Result<ExitCode> {
    let (series, mut cfg) = match args.source {
        SourceArg::Hadcrut => (
            climate::hadcrut_from_dir(&args.data_dir)?,
            SweepConfig::hadcrut(),
        ),
        SourceArg::Holocene => {
            let method: HoloceneMethod = args.method.parse()?;
            (
                climate::holocene_from_dir(&args.data_dir, method, args.offset)?,
                SweepConfig::holocene(),
            )
        }
    };
    if let Some(n) = args.n_j {
        cfg.stages.stage_len = n;
    }
    if let Some(k) = args.k {
        cfg.stages.stages = k;
    }
    let cfg_stages = StageConfig::new(cfg.stages.stage_len, cfg.stages.stages)?;
    cfg.stages = cfg_stages;
    let report = with_workers(args.workers, || climate::sweep(&series, &cfg))??;
    if let Some(path) = &args.out {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        report.write_csv(std::io::BufWriter::new(f))?;
    } else {
        report.write_csv(std::io::stdout().lock())?;
    }
    println!("{}", report.summary());
    Ok(ExitCode::SUCCESS)
}

fn oracle_cmd(args: SeriesArgs) -> Result<ExitCode> {
    let family = args.family.context("--family is required")?;
    let mut plan = ExperimentPlan::new("oracle", family.into(), BoundKind::Nonparametric, 1, 1);
    apply_series(&mut plan, &args);
    let spec = plan.series_spec()?;
    let v = classify_family(&spec)?;
    println!(
        "{} {}: {}",
        spec.family.name(),
        spec.family.params(),
        v.label
    );
    println!("rationale: {}", v.rationale);
    Ok(ExitCode::SUCCESS)
}

fn calibrate_cmd(args: CalibrateArgs) -> Result<ExitCode> {
    let mut cfg = CalibrationConfig::dirichlet_proxy();
    cfg.c1_grid = grid(args.c1_min, args.c1_max, args.c1_step);
    cfg.stages = StageConfig::new(args.n_j, args.k)?;
    cfg.floor = args.floor;
    let cal = with_workers(args.workers, || calibrate_c1(&cfg))??;
    let best = cal.best_set();
    println!("recommended_c1={}", cal.recommended);
    println!("agreement={:.4}", cal.agreement);
    println!(
        "best_set=[{}, {}] ({} grid points)",
        best.first().copied().unwrap_or(f64::NAN),
        best.last().copied().unwrap_or(f64::NAN),
        best.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn replicate_cmd(args: ReplicateArgs) -> Result<ExitCode> {
    if args.list {
        for id in figure_ids() {
            let fig = Figure::named(id)?;
            println!(
                "{id}\t{}{}",
                fig.title,
                if fig.heavy { " (heavy)" } else { "" }
            );
        }
        return Ok(ExitCode::SUCCESS);
    }
    let id = args.figure.expect("clap requires figure");
    let fig = Figure::named(&id)?;
    if fig.heavy && args.scale.is_none() {
        eprintln!("note: `{id}` is a full-scale run; consider --scale");
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
    }
    let rep = replicate(
        &fig,
        ReplicateOptions {
            workers: args.workers,
            scale: args.scale,
        },
        args.out_dir.as_deref(),
    )?;
    println!("panel,expected,verdict,tail_mean,match");
    for p in &rep.panels {
        let v = p.outcome.run.verdict;
        println!(
            "{},{},{},{:.6},{}",
            p.panel,
            p.expected
                .map(|e| e.to_string())
                .unwrap_or_else(|| "-".into()),
            v.label,
            v.tail_mean,
            if p.matches() { "yes" } else { "no" }
        );
    }
    if rep.all_match() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{} panel(s) disagree with the expected verdicts",
            rep.mismatches().len()
        );
        Ok(ExitCode::from(2))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Climate(a) => climate_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Replicate(a) => replicate_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
