//! Command-line interface. Every command is deterministic given its seed
//! and configuration; wall-clock fields are only written with `--timings`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::{
    emit_results, generate_shift_data, run_certificate_study, run_invariance_study, run_newsvendor_frontier,
    run_regression_on_table, run_sample_efficiency, CertificateConfig, InvarianceConfig, NewsvendorConfig,
    NewsvendorMethod, RegressionMethod, RegressionSplitConfig, ShiftConfig,
};
use crate::calibrate::{calibrate, Geometry};
use crate::centres::{fit_copula_centre, fit_empirical, fit_student_t_gibbs, GibbsConfig};
use crate::error::{Error, Result};
use crate::io::read_numeric_csv;
use crate::model::{BulkSet, DecisionLoss, OutcomeMatrix};
use crate::solve::{
    build_cvar_objective, build_kl_bdro_objective, build_lv_objective, build_ridge_objective, build_saa_objective,
    build_wasserstein_lad_objective, minimize, ObjectiveOracle, SolveOptions, SolveReport,
};
use crate::worstcase::{evaluate_risks, oracle, RiskInstance};

#[derive(Debug, Parser)]
#[command(name = "lvdro", version, about = "Bulk-calibrated linear-vacuous DRO")]
pub struct Cli {
    /// JSON file overriding the command's configuration, field for field.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Record wall-clock timings in the outputs (makes them nondeterministic).
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate a bulk set on a CSV outcome matrix.
    Calibrate(CalibrateArgs),
    /// Worst-case risks of a JSON instance at each tolerance.
    Risk(RiskArgs),
    /// Randomized cross-checks of the closed forms against brute force.
    Oracle(OracleArgs),
    /// Fit a centre sampler and write it as JSON.
    Centre(CentreArgs),
    /// Minimize an objective described by a JSON problem file.
    Solve(SolveArgs),
    /// Student-t newsvendor frontier.
    Newsvendor(NewsvendorArgs),
    /// Gap-split regression with geo-block CV.
    Housing(HousingArgs),
    /// Newsvendor MSD curves across sampling budgets.
    SampleEfficiency(SampleEfficiencyArgs),
    /// Monte Carlo check of the risk certificate.
    Certificate(StudyArgs),
    /// LV-LAD tolerance invariance under joint and product bulks.
    Invariance(StudyArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV outcome matrix, one row per observation.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Geometry::Ellipsoid)]
    pub geometry: Geometry,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Share of rows used to fit the score.
    #[arg(long, default_value_t = 0.5)]
    pub split_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// JSON risk instance.
    #[arg(long)]
    pub instance: PathBuf,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CentreKind {
    Empirical,
    Copula,
    StudentT,
}

#[derive(Debug, Args)]
pub struct CentreArgs {
    /// CSV training data; for `copula` the last column is the target.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: CentreKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Student-t degrees of freedom.
    #[arg(long, default_value_t = 3.0)]
    pub nu: f64,
    /// Retained Gibbs states.
    #[arg(long, default_value_t = 100)]
    pub retained: usize,
    /// Diagonal jitter of the copula correlation.
    #[arg(long, default_value_t = 1e-6)]
    pub jitter: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// JSON problem file; data paths inside it are relative to its directory.
    #[arg(long)]
    pub problem: PathBuf,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NewsvendorArgs {
    #[arg(long)]
    pub contamination: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Predictive draws per replication.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Points per tolerance grid.
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Methods to run; all when absent.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<NewsvendorMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HousingArgs {
    /// Input CSV; required unless `--synthetic` is set.
    #[arg(long, required_unless_present = "synthetic")]
    pub csv: Option<PathBuf>,
    /// Use the synthetic conditional-shift dataset instead of a CSV.
    #[arg(long, conflicts_with = "csv")]
    pub synthetic: bool,
    #[arg(long)]
    pub order_col: Option<String>,
    #[arg(long)]
    pub target_col: Option<String>,
    #[arg(long)]
    pub lat_col: Option<String>,
    #[arg(long)]
    pub lon_col: Option<String>,
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<RegressionMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleEfficiencyArgs {
    #[arg(long)]
    pub contamination: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Sampling budgets; the largest is the reference.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Vec<usize>,
    /// Methods to run; LV, KL-BAS_PP and KL-BDRO when absent.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<NewsvendorMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Objective of a `solve` problem file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "snake_case")]
pub enum ProblemSpec {
    Saa { loss: DecisionLoss, samples: PathBuf },
    Lv { loss: DecisionLoss, samples: PathBuf, bulk: BulkSet, eps: f64 },
    Cvar { loss: DecisionLoss, samples: PathBuf, eps: f64 },
    /// One sample file gives KL-DRO; several give KL-BDRO.
    Kl { loss: DecisionLoss, draws: Vec<PathBuf>, eps: f64 },
    WassersteinLad { data: PathBuf, rho: f64, sigma_y: f64 },
    Ridge { data: PathBuf, lambda: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Problem {
    #[serde(flatten)]
    pub spec: ProblemSpec,
    #[serde(default)]
    pub options: SolveOptions,
    /// Starting point; the objective's default when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).context(format!("parsing {}", path.display())))
}

/// `base` with the fields present in the JSON object at `path` replaced.
fn overlay_json<T: Serialize + DeserializeOwned>(base: &T, path: &Path) -> Result<T> {
    let mut value = serde_json::to_value(base)?;
    let patch: serde_json::Value = read_json(path)?;
    match (value.as_object_mut(), patch) {
        (Some(obj), serde_json::Value::Object(fields)) => obj.extend(fields),
        _ => return Err(Error::invalid(format!("{} must hold a JSON object", path.display()))),
    }
    serde_json::from_value(value).map_err(|e| Error::from(e).context(format!("parsing {}", path.display())))
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).map_err(|e| Error::from(e).context(format!("writing {}", p.display())))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn matrix(path: &Path) -> Result<OutcomeMatrix> {
    Ok(read_numeric_csv(path)
        .map_err(|e| e.context(format!("reading {}", path.display())))?
        .matrix)
}

/// Builds and minimizes a problem. Relative data paths resolve against `base`.
pub fn solve_problem(problem: &Problem, base: &Path) -> Result<SolveReport> {
    let load = |p: &PathBuf| matrix(&base.join(p));
    let oracle: Box<dyn ObjectiveOracle> = match &problem.spec {
        ProblemSpec::Saa { loss, samples } => Box::new(build_saa_objective(*loss, load(samples)?)?),
        ProblemSpec::Lv {
            loss,
            samples,
            bulk,
            eps,
        } => Box::new(build_lv_objective(*loss, load(samples)?, bulk.clone(), *eps)?),
        ProblemSpec::Cvar { loss, samples, eps } => Box::new(build_cvar_objective(*loss, load(samples)?, *eps)?),
        ProblemSpec::Kl { loss, draws, eps } => {
            let draws = draws.iter().map(load).collect::<Result<Vec<_>>>()?;
            Box::new(build_kl_bdro_objective(*loss, draws, *eps)?)
        }
        ProblemSpec::WassersteinLad { data, rho, sigma_y } => {
            Box::new(build_wasserstein_lad_objective(load(data)?, *rho, *sigma_y)?)
        }
        ProblemSpec::Ridge { data, lambda } => Box::new(build_ridge_objective(load(data)?, *lambda)?),
    };
    let x0 = problem.x0.clone().unwrap_or_else(|| oracle.initial_point());
    minimize(oracle.as_ref(), &x0, &problem.options)
}

fn newsvendor_config(cli: &Cli, contamination: Option<f64>, replications: Option<usize>, grid: Option<usize>) -> Result<NewsvendorConfig> {
    let mut cfg: NewsvendorConfig = config_or_default(cli.config.as_deref())?;
    if let Some(c) = contamination {
        cfg.contamination = c;
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    if let Some(n) = grid {
        cfg = cfg.with_grid_size(n);
    }
    cfg.timings |= cli.timings;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Calibrate(a) => {
            let data = matrix(&a.input)?;
            let cal = calibrate(&data, a.geometry, a.gamma, a.delta, a.split_ratio, a.seed)?;
            write_text(a.out.as_deref(), &to_json(&cal)?)
        }
        Command::Risk(a) => {
            let inst: RiskInstance = read_json(&a.instance)?;
            let rows = evaluate_risks(&inst)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
            write_text(a.out.as_deref(), &String::from_utf8_lossy(&bytes))
        }
        Command::Oracle(a) => {
            let report = oracle::run(a.seed, a.instances);
            for c in &report.checks {
                eprintln!(
                    "{} {}: max error {:e} (tolerance {:e}, {} instances)",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_error,
                    c.tolerance,
                    c.instances
                );
            }
            write_text(a.out.as_deref(), &to_json(&report)?)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Error::invalid("oracle cross-checks failed"))
            }
        }
        Command::Centre(a) => {
            let data = matrix(&a.input)?;
            let sampler = match a.kind {
                CentreKind::Empirical => fit_empirical(data),
                CentreKind::Copula => {
                    let p = data.n_cols();
                    if p < 2 {
                        return Err(Error::invalid("copula centre needs at least one feature and a target column"));
                    }
                    let x = data.select_cols(&(0..p - 1).collect::<Vec<_>>())?;
                    let y: Vec<f64> = data.rows().map(|r| r[p - 1]).collect();
                    fit_copula_centre(&x, &y, a.jitter)?
                }
                CentreKind::StudentT => fit_student_t_gibbs(&data, &GibbsConfig::with_retained(a.nu, a.retained), a.seed)?,
            };
            write_text(Some(&a.out), &to_json(&sampler)?)
        }
        Command::Solve(a) => {
            let problem: Problem = read_json(&a.problem)?;
            let base = a.problem.parent().unwrap_or(Path::new("."));
            let mut report = solve_problem(&problem, base)?;
            if !cli.timings {
                report.wall_seconds = None;
            }
            write_text(a.out.as_deref(), &to_json(&report)?)
        }
        Command::Newsvendor(a) => {
            let mut cfg = newsvendor_config(&cli, a.contamination, a.replications, a.grid_size)?;
            if let Some(b) = a.budget {
                cfg.budget = b;
            }
            let methods = if a.methods.is_empty() { NewsvendorMethod::ALL.to_vec() } else { a.methods.clone() };
            let run = run_newsvendor_frontier(&cfg, &methods, a.seed)?;
            emit_results(&run.rows, &a.out, "frontier")?;
            emit_results(&run.summary, &a.out, "frontier_summary")?;
            emit_results(&run.replications, &a.out, "replications")?;
            Ok(())
        }
        Command::Housing(a) => {
            let (table, mut cfg) = if a.synthetic {
                let shift = ShiftConfig::default();
                let base = shift.split_config();
                let cfg = match &cli.config {
                    Some(p) => overlay_json(&base, p)?,
                    None => base,
                };
                (generate_shift_data(&shift, a.seed)?, cfg)
            } else {
                let path = a.csv.as_ref().expect("clap requires --csv without --synthetic");
                let table = read_numeric_csv(path).map_err(|e| e.context(format!("reading {}", path.display())))?;
                (table, config_or_default::<RegressionSplitConfig>(cli.config.as_deref())?)
            };
            if let Some(c) = &a.order_col {
                cfg.order_col = c.clone();
            }
            if let Some(c) = &a.target_col {
                cfg.target_col = c.clone();
            }
            if let Some(c) = &a.lat_col {
                cfg.lat_col = c.clone();
            }
            if let Some(c) = &a.lon_col {
                cfg.lon_col = c.clone();
            }
            if let Some(g) = a.gap {
                cfg.gap = g;
            }
            cfg.timings |= cli.timings;
            let methods = if a.methods.is_empty() { RegressionMethod::ALL.to_vec() } else { a.methods.clone() };
            let report = run_regression_on_table(&table, &cfg, &methods, a.seed)?;
            emit_results(&report.metrics, &a.out, "metrics")?;
            // ERM alone has nothing to select
            if !report.selection.is_empty() {
                emit_results(&report.selection, &a.out, "selection")?;
            }
            Ok(())
        }
        Command::SampleEfficiency(a) => {
            let cfg = newsvendor_config(&cli, a.contamination, a.replications, a.grid_size)?;
            let budgets = if a.budgets.is_empty() { crate::bench::newsvendor::DEFAULT_BUDGETS.to_vec() } else { a.budgets.clone() };
            let methods = if a.methods.is_empty() {
                vec![NewsvendorMethod::Lv, NewsvendorMethod::KlBasPp, NewsvendorMethod::KlBdro]
            } else {
                a.methods.clone()
            };
            let report = run_sample_efficiency(&cfg, &budgets, &methods, a.seed)?;
            emit_results(&report.curves, &a.out, "budget_curves")?;
            emit_results(&report.deltas, &a.out, "delta_msd")?;
            Ok(())
        }
        Command::Certificate(a) => {
            let cfg: CertificateConfig = config_or_default(cli.config.as_deref())?;
            let study = run_certificate_study(&cfg, a.seed)?;
            eprintln!("hold rate {:.4}, bulk coverage rate {:.4}", study.hold_rate, study.coverage_rate);
            emit_results(&study.trials, &a.out, "certificate")?;
            Ok(())
        }
        Command::Invariance(a) => {
            let cfg: InvarianceConfig = config_or_default(cli.config.as_deref())?;
            let study = run_invariance_study(&cfg, a.seed)?;
            eprintln!("spread across tolerances: joint {:.4}, product {:.4}", study.joint_spread, study.product_spread);
            let rows: Vec<_> = study.rows.iter().map(InvarianceCsvRow::from).collect();
            emit_results(&rows, &a.out, "invariance")?;
            Ok(())
        }
    }
}

/// Flat form of an invariance row; CSV cannot hold the slope vector.
#[derive(Serialize)]
struct InvarianceCsvRow {
    bulk: String,
    tolerance: f64,
    slope: String,
    intercept: f64,
    rel_error: f64,
}

impl From<&crate::bench::InvarianceRow> for InvarianceCsvRow {
    fn from(r: &crate::bench::InvarianceRow) -> Self {
        Self {
            bulk: r.bulk.clone(),
            tolerance: r.tolerance,
            slope: r.slope.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            intercept: r.intercept,
            rel_error: r.rel_error,
        }
    }
}
