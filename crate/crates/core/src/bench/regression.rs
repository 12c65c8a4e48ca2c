//! Linear regression under an ordered (geographic) split with a gap band,
//! tuned by geo-block cross-validation on the training region.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mean_sd;
use crate::calibrate::{calibrate_blockwise, fit_score, split_indices, Geometry};
use crate::centres::{fit_copula_centre, rejection_sample_bulk};
use crate::error::{Error, Result};
use crate::io::{read_numeric_csv, NumericTable};
use crate::linalg::dot;
use crate::model::{BulkBlock, BulkSet, DecisionLoss, OutcomeMatrix};
use crate::rng::{self, child_seed};
use crate::solve::{
    build_cvar_objective, build_lv_objective, build_ridge_objective, build_saa_objective,
    build_wasserstein_lad_objective, minimize_default, solve_ridge, ObjectiveOracle, SolveOptions,
};
use crate::worstcase::cvar_uniform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RegressionMethod {
    Lv,
    Cvar,
    Wasserstein,
    Ridge,
    Erm,
}

impl RegressionMethod {
    pub const ALL: [RegressionMethod; 5] = [
        RegressionMethod::Lv,
        RegressionMethod::Cvar,
        RegressionMethod::Wasserstein,
        RegressionMethod::Ridge,
        RegressionMethod::Erm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RegressionMethod::Lv => "lv",
            RegressionMethod::Cvar => "cvar",
            RegressionMethod::Wasserstein => "wasserstein",
            RegressionMethod::Ridge => "ridge",
            RegressionMethod::Erm => "erm",
        }
    }

    /// Hyperparameter grid; `None` entries mean the method has none.
    fn grid(&self, cfg: &RegressionSplitConfig) -> Vec<Option<f64>> {
        let g = match self {
            RegressionMethod::Lv => &cfg.lv_grid,
            RegressionMethod::Cvar => &cfg.cvar_grid,
            RegressionMethod::Wasserstein => &cfg.wasserstein_grid,
            RegressionMethod::Ridge => &cfg.ridge_grid,
            RegressionMethod::Erm => return vec![None],
        };
        g.iter().copied().map(Some).collect()
    }
}

impl fmt::Display for RegressionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSplitConfig {
    /// Column that orders the rows (name, or index for headerless files).
    pub order_col: String,
    pub target_col: String,
    pub lat_col: String,
    pub lon_col: String,
    /// Feature columns; `None` uses every column except the target.
    pub feature_cols: Option<Vec<String>>,
    /// Sort by the order column from largest to smallest (East first when
    /// ordering by longitude).
    pub descending: bool,
    pub train_fraction: f64,
    /// Width of the excluded band between train and test, as a fraction.
    pub gap: f64,
    /// The CV grid has `cv_bins × cv_bins` longitude/latitude cells.
    pub cv_bins: usize,
    pub folds: usize,
    pub lv_grid: Vec<f64>,
    pub cvar_grid: Vec<f64>,
    pub wasserstein_grid: Vec<f64>,
    pub ridge_grid: Vec<f64>,
    /// Total bulk budget; each of the two blocks gets half.
    pub gamma: f64,
    pub delta: f64,
    /// Fraction of the fitting rows used to fit the bulk scores.
    pub bulk_fit_ratio: f64,
    pub copula_jitter: f64,
    /// Predictive draws for LV; the first half that land in the bulk are
    /// kept.
    pub lv_budget: usize,
    /// Use the max-score threshold when a bulk block cannot be certified
    /// instead of failing.
    pub allow_uncertified: bool,
    pub replications: usize,
    pub solver: SolveOptions,
    pub timings: bool,
}

const TAIL_GRID: [f64; 8] = [0.025, 0.05, 0.075, 0.10, 0.125, 0.15, 0.175, 0.20];

impl Default for RegressionSplitConfig {
    fn default() -> Self {
        Self {
            order_col: "longitude".into(),
            target_col: "median_house_value".into(),
            lat_col: "latitude".into(),
            lon_col: "longitude".into(),
            feature_cols: None,
            descending: true,
            train_fraction: 0.5,
            gap: 0.3,
            cv_bins: 6,
            folds: 3,
            lv_grid: TAIL_GRID.to_vec(),
            cvar_grid: TAIL_GRID.to_vec(),
            wasserstein_grid: vec![0.05, 0.10, 0.50, 1.0, 1.5, 2.0, 2.5, 3.0],
            ridge_grid: vec![1e-2, 1e-1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0],
            gamma: 0.1,
            delta: 0.05,
            bulk_fit_ratio: 0.8,
            copula_jitter: 1e-6,
            lv_budget: 5000,
            allow_uncertified: false,
            replications: 1,
            solver: SolveOptions::default(),
            timings: false,
        }
    }
}

impl RegressionSplitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(self.train_fraction > 0.0 && self.gap >= 0.0 && self.train_fraction + self.gap < 1.0) {
            return bad(format!(
                "train fraction {} and gap {} must be nonnegative and leave a test region",
                self.train_fraction, self.gap
            ));
        }
        if self.cv_bins == 0 || self.folds < 2 || self.replications == 0 {
            return bad("need cv_bins >= 1, folds >= 2 and replications >= 1".into());
        }
        for (name, g) in [
            ("lv_grid", &self.lv_grid),
            ("cvar_grid", &self.cvar_grid),
            ("wasserstein_grid", &self.wasserstein_grid),
            ("ridge_grid", &self.ridge_grid),
        ] {
            if g.is_empty() {
                return bad(format!("{name} is empty"));
            }
        }
        if self.lv_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("LV tolerances must lie in [0, 1]".into());
        }
        if self.cvar_grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("CVaR tail masses must lie in (0, 1]".into());
        }
        if self.lv_budget < 2 {
            return bad("lv_budget must be at least 2".into());
        }
        Ok(())
    }
}

/// Test-set error summary of one fitted predictor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// 98th percentile of the absolute error, linear interpolation.
    pub p98: f64,
    /// Mean of the worst 2% of absolute errors.
    pub cvar2: f64,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics at position `q·(n − 1)`.
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn error_metrics(abs_err: &[f64]) -> Result<ErrorMetrics> {
    if abs_err.is_empty() {
        return Err(Error::invalid("no errors to summarize"));
    }
    let n = abs_err.len() as f64;
    let mut sorted = abs_err.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ErrorMetrics {
        mae: abs_err.iter().sum::<f64>() / n,
        rmse: (abs_err.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        p98: quantile_linear(&sorted, 0.98),
        cvar2: cvar_uniform(abs_err, 0.02)?,
    })
}

/// Test metrics of the selected predictor of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: RegressionMethod,
    pub replication: usize,
    /// Selected hyperparameter; empty for ERM.
    pub hyperparameter: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub p98: f64,
    pub cvar2: f64,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
}

/// Cross-validation score of one grid value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub method: RegressionMethod,
    pub replication: usize,
    pub hyperparameter: Option<f64>,
    pub validation_mae: f64,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub metrics: Vec<MetricRow>,
    pub selection: Vec<SelectionRow>,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_gap: usize,
    pub n_test: usize,
    pub n_blocks: usize,
}

impl RegressionReport {
    pub fn metric(&self, method: RegressionMethod, replication: usize) -> Option<&MetricRow> {
        self.metrics
            .iter()
            .find(|m| m.method == method && m.replication == replication)
    }
}

/// Rows sorted by the order column, features standardized on the training
/// region, target last.
struct Prepared {
    xy: OutcomeMatrix,
    lon: Vec<f64>,
    lat: Vec<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
    n_gap: usize,
}

fn prepare(table: &NumericTable, cfg: &RegressionSplitConfig) -> Result<Prepared> {
    let m = &table.matrix;
    let col = |name: &str, what: &str| {
        table
            .column_index(name)
            .map_err(|e| e.context(format!("{what} column")))
    };
    let order = col(&cfg.order_col, "order")?;
    let target = col(&cfg.target_col, "target")?;
    let lat = col(&cfg.lat_col, "latitude")?;
    let lon = col(&cfg.lon_col, "longitude")?;
    let features: Vec<usize> = match &cfg.feature_cols {
        Some(names) => names.iter().map(|n| col(n, "feature")).collect::<Result<_>>()?,
        None => (0..m.n_cols()).filter(|&j| j != target).collect(),
    };
    if features.is_empty() {
        return Err(Error::invalid("no feature columns"));
    }
    if features.contains(&target) {
        return Err(Error::invalid("the target column cannot also be a feature"));
    }

    let n = m.n_rows();
    let mut idx: Vec<usize> = (0..n).collect();
    // stable: ties keep file order
    idx.sort_by(|&a, &b| {
        let c = m.row(a)[order].total_cmp(&m.row(b)[order]);
        if cfg.descending {
            c.reverse()
        } else {
            c
        }
    });
    let n_train = (cfg.train_fraction * n as f64).floor() as usize;
    let n_gap = (cfg.gap * n as f64).floor() as usize;
    if n_train == 0 || n_train + n_gap >= n {
        return Err(Error::invalid(format!(
            "{n} rows leave an empty train or test region (train {n_train}, gap {n_gap})"
        )));
    }

    let p = features.len();
    let stats: Vec<(f64, f64)> = features
        .iter()
        .map(|&j| {
            let v: Vec<f64> = idx[..n_train].iter().map(|&i| m.row(i)[j]).collect();
            let (mu, sd) = mean_sd(&v);
            (mu, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect();
    let mut values = Vec::with_capacity(n * (p + 1));
    for &i in &idx {
        let r = m.row(i);
        values.extend(features.iter().zip(&stats).map(|(&j, (mu, sd))| (r[j] - mu) / sd));
        values.push(r[target]);
    }
    Ok(Prepared {
        xy: OutcomeMatrix::new(n, p + 1, values)?,
        lon: idx.iter().map(|&i| m.row(i)[lon]).collect(),
        lat: idx.iter().map(|&i| m.row(i)[lat]).collect(),
        train: (0..n_train).collect(),
        test: (n_train + n_gap..n).collect(),
        n_gap,
    })
}

fn bin(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1)
}

/// Fold index of every training row from a `bins × bins` longitude/latitude
/// grid; nonempty cells are shuffled and dealt to folds in turn. Returns the
/// folds and the number of nonempty cells.
pub fn geo_block_folds(
    lon: &[f64],
    lat: &[f64],
    bins: usize,
    folds: usize,
    seed: u64,
) -> Result<(Vec<usize>, usize)> {
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)))
    };
    let (lon_lo, lon_hi) = range(lon);
    let (lat_lo, lat_hi) = range(lat);
    let cells: Vec<usize> = lon
        .iter()
        .zip(lat)
        .map(|(&a, &b)| bin(a, lon_lo, lon_hi, bins) * bins + bin(b, lat_lo, lat_hi, bins))
        .collect();
    let mut used: Vec<usize> = cells.clone();
    used.sort_unstable();
    used.dedup();
    if used.len() < folds {
        return Err(Error::invalid(format!(
            "{} nonempty geo blocks cannot fill {folds} folds",
            used.len()
        )));
    }
    used.shuffle(&mut rng::stream(seed, 0));
    let mut fold_of_cell = vec![0; bins * bins];
    for (k, c) in used.iter().enumerate() {
        fold_of_cell[*c] = k % folds;
    }
    Ok((cells.iter().map(|c| fold_of_cell[*c]).collect(), used.len()))
}

/// Shared per-dataset state of the LV fit: scenarios and the bulk set.
struct LvFit {
    samples: OutcomeMatrix,
    bulk: BulkSet,
}

fn fit_lv(data: &OutcomeMatrix, cfg: &RegressionSplitConfig, seed: u64) -> Result<LvFit> {
    let p = data.n_cols() - 1;
    let xcols: Vec<usize> = (0..p).collect();
    let x = data.select_cols(&xcols)?;
    let yv = data.column(p);
    let y = data.select_cols(&[p])?;
    let centre = fit_copula_centre(&x, &yv, cfg.copula_jitter)?;

    let (fit, sel) = split_indices(data.n_rows(), cfg.bulk_fit_ratio, child_seed(seed, 1))?;
    let sx = fit_score(&x.select_rows(&fit)?, Geometry::Ellipsoid)?;
    let sy = fit_score(&y.select_rows(&fit)?, Geometry::Box)?;
    let half = (cfg.gamma / 2.0, cfg.delta / 2.0);
    let cal = calibrate_blockwise(
        &[sx.scores(&x.select_rows(&sel)?)?, sy.scores(&y.select_rows(&sel)?)?],
        &[half, half],
    )?;
    if !cfg.allow_uncertified {
        for (name, b) in ["feature", "target"].iter().zip(&cal.blocks) {
            b.require_certified().map_err(|e| e.context(format!("{name} bulk block")))?;
        }
    }
    let bulk = BulkSet::product(vec![
        BulkBlock {
            indices: xcols,
            set: sx.bulk(cal.blocks[0].threshold)?,
        },
        BulkBlock {
            indices: vec![p],
            set: sy.bulk(cal.blocks[1].threshold)?,
        },
    ])?;
    let samples = rejection_sample_bulk(&centre, &bulk, (cfg.lv_budget / 2).max(1), 2.0, child_seed(seed, 2))?;
    Ok(LvFit { samples, bulk })
}

/// Fits `(w, b₀)` for one method and hyperparameter on `data`.
fn fit_one(
    method: RegressionMethod,
    h: Option<f64>,
    data: &OutcomeMatrix,
    lv: Option<&LvFit>,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let p = data.n_cols() - 1;
    let lad = DecisionLoss::lad(p)?;
    let h = h.unwrap_or(0.0);
    let solve = |o: &dyn ObjectiveOracle| minimize_default(o, opts).map(|r| r.minimizer);
    let mut x = match method {
        RegressionMethod::Erm => solve(&build_saa_objective(lad, data.clone())?)?,
        RegressionMethod::Cvar => solve(&build_cvar_objective(lad, data.clone(), h)?)?,
        RegressionMethod::Ridge => solve_ridge(&build_ridge_objective(data.clone(), h)?)?.minimizer,
        RegressionMethod::Wasserstein => {
            let sy = mean_sd(&data.column(p)).1;
            let sy = if sy > 0.0 { sy } else { 1.0 };
            solve(&build_wasserstein_lad_objective(data.clone(), h, sy)?)?
        }
        RegressionMethod::Lv => {
            let lv = lv.expect("LV fit prepared");
            solve(&build_lv_objective(lad, lv.samples.clone(), lv.bulk.clone(), h)?)?
        }
    };
    x.truncate(p + 1);
    Ok(x)
}

fn abs_errors(coef: &[f64], data: &OutcomeMatrix, rows: &[usize]) -> Vec<f64> {
    let p = coef.len() - 1;
    rows.iter()
        .map(|&i| {
            let r = data.row(i);
            (r[p] - dot(&coef[..p], &r[..p]) - coef[p]).abs()
        })
        .collect()
}

fn run_method(
    method: RegressionMethod,
    prep: &Prepared,
    fold_of: &[usize],
    cfg: &RegressionSplitConfig,
    replication: usize,
    seed: u64,
) -> Result<(MetricRow, Vec<SelectionRow>)> {
    let total_start = Instant::now();
    let grid = method.grid(cfg);

    // geo-block CV over the training rows only
    let cv_start = Instant::now();
    let mut scores = vec![0.0; grid.len()];
    if grid.len() > 1 {
        for f in 0..cfg.folds {
            let fit_rows: Vec<usize> = prep.train.iter().copied().filter(|&i| fold_of[i] != f).collect();
            let val_rows: Vec<usize> = prep.train.iter().copied().filter(|&i| fold_of[i] == f).collect();
            debug_assert!(fit_rows.iter().chain(&val_rows).all(|i| !prep.test.contains(i)));
            if fit_rows.is_empty() || val_rows.is_empty() {
                return Err(Error::invalid(format!("fold {f} is empty")));
            }
            let fit_data = prep.xy.select_rows(&fit_rows)?;
            let lv = match method {
                RegressionMethod::Lv => Some(fit_lv(&fit_data, cfg, child_seed(seed, 100 + f as u64))?),
                _ => None,
            };
            for (k, h) in grid.iter().enumerate() {
                let coef = fit_one(method, *h, &fit_data, lv.as_ref(), &cfg.solver)
                    .map_err(|e| e.context(format!("fold {f}, hyperparameter {h:?}")))?;
                let err = abs_errors(&coef, &prep.xy, &val_rows);
                scores[k] += err.iter().sum::<f64>() / err.len() as f64 / cfg.folds as f64;
            }
        }
    }
    let cv_seconds = cv_start.elapsed().as_secs_f64();
    let best = (0..grid.len())
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
        .expect("grid is nonempty");
    let selection = grid
        .iter()
        .enumerate()
        .filter(|_| grid.len() > 1)
        .map(|(k, h)| SelectionRow {
            method,
            replication,
            hyperparameter: *h,
            validation_mae: scores[k],
            selected: k == best,
        })
        .collect();

    let train_data = prep.xy.select_rows(&prep.train)?;
    let lik_start = Instant::now();
    let lv = match method {
        RegressionMethod::Lv => Some(fit_lv(&train_data, cfg, child_seed(seed, 99))?),
        _ => None,
    };
    let likelihood_seconds = lik_start.elapsed().as_secs_f64();
    let solve_start = Instant::now();
    let coef = fit_one(method, grid[best], &train_data, lv.as_ref(), &cfg.solver)?;
    let solve_seconds = solve_start.elapsed().as_secs_f64();
    let m = error_metrics(&abs_errors(&coef, &prep.xy, &prep.test))?;
    let total_seconds = total_start.elapsed().as_secs_f64();
    let t = |v: f64| cfg.timings.then_some(v);
    Ok((
        MetricRow {
            method,
            replication,
            hyperparameter: grid[best],
            mae: m.mae,
            rmse: m.rmse,
            p98: m.p98,
            cvar2: m.cvar2,
            n_train: prep.train.len(),
            n_test: prep.test.len(),
            cv_seconds: t(cv_seconds),
            likelihood_seconds: t(likelihood_seconds),
            solve_seconds: t(solve_seconds),
            total_seconds: t(total_seconds),
        },
        selection,
    ))
}

/// Runs the gap-split experiment on an in-memory table.
pub fn run_regression_on_table(
    table: &NumericTable,
    cfg: &RegressionSplitConfig,
    methods: &[RegressionMethod],
    seed: u64,
) -> Result<RegressionReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let prep = prepare(table, cfg)?;
    let train_lon: Vec<f64> = prep.train.iter().map(|&i| prep.lon[i]).collect();
    let train_lat: Vec<f64> = prep.train.iter().map(|&i| prep.lat[i]).collect();

    let mut metrics = Vec::new();
    let mut selection = Vec::new();
    let mut n_blocks = 0;
    for r in 0..cfg.replications {
        let rep_seed = child_seed(seed, r as u64);
        let (train_folds, nb) = geo_block_folds(&train_lon, &train_lat, cfg.cv_bins, cfg.folds, child_seed(rep_seed, 1))?;
        n_blocks = nb;
        // fold index per prepared row; non-training rows never enter CV
        let mut fold_of = vec![usize::MAX; prep.xy.n_rows()];
        for (&i, f) in prep.train.iter().zip(&train_folds) {
            fold_of[i] = *f;
        }
        for &method in &methods {
            let (row, sel) = run_method(method, &prep, &fold_of, cfg, r, child_seed(rep_seed, 2))
                .map_err(|e| e.context(format!("method {method}, replication {r}")))?;
            metrics.push(row);
            selection.extend(sel);
        }
    }
    Ok(RegressionReport {
        metrics,
        selection,
        n_rows: prep.xy.n_rows(),
        n_train: prep.train.len(),
        n_gap: prep.n_gap,
        n_test: prep.test.len(),
        n_blocks,
    })
}

/// Reads a CSV and runs [`run_regression_on_table`].
pub fn run_regression_experiment(
    csv_path: impl AsRef<Path>,
    cfg: &RegressionSplitConfig,
    methods: &[RegressionMethod],
    seed: u64,
) -> Result<RegressionReport> {
    let table = read_numeric_csv(csv_path)?;
    run_regression_on_table(&table, cfg, methods, seed)
}

/// Synthetic dataset whose `y | x` slope drifts with longitude, so the
/// West test region follows a different conditional law than the East
/// training region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub n: usize,
    /// Slope on `x1` at the western edge (longitude 0).
    pub slope_west: f64,
    /// Slope on `x1` at the eastern edge (longitude 1).
    pub slope_east: f64,
    pub slope_x2: f64,
    pub intercept: f64,
    pub feature_correlation: f64,
    pub noise: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            n: 16000,
            slope_west: 0.4,
            slope_east: 1.6,
            slope_x2: 0.5,
            intercept: 1.0,
            feature_correlation: 0.3,
            noise: 0.5,
        }
    }
}

impl ShiftConfig {
    /// Split settings matching the generated column names.
    pub fn split_config(&self) -> RegressionSplitConfig {
        RegressionSplitConfig {
            order_col: "lon".into(),
            target_col: "y".into(),
            lat_col: "lat".into(),
            lon_col: "lon".into(),
            feature_cols: Some(vec!["x1".into(), "x2".into()]),
            ..RegressionSplitConfig::default()
        }
    }
}

/// Columns `lon, lat, x1, x2, y` with `lon, lat ~ U(0, 1)`, correlated
/// standard normal features and
/// `y = intercept + s(lon)·x1 + slope_x2·x2 + noise·e`.
pub fn generate_shift_data(cfg: &ShiftConfig, seed: u64) -> Result<NumericTable> {
    if cfg.n < 10 {
        return Err(Error::invalid("need at least 10 rows"));
    }
    if !(cfg.feature_correlation.abs() < 1.0 && cfg.noise >= 0.0) {
        return Err(Error::invalid("need |feature_correlation| < 1 and noise >= 0"));
    }
    let mut rng = rng::stream(seed, 0);
    let c = cfg.feature_correlation;
    let mut values = Vec::with_capacity(cfg.n * 5);
    for _ in 0..cfg.n {
        let lon: f64 = rng.random();
        let lat: f64 = rng.random();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let x1 = z1;
        let x2 = c * z1 + (1.0 - c * c).sqrt() * z2;
        let s = cfg.slope_west + (cfg.slope_east - cfg.slope_west) * lon;
        let y = cfg.intercept + s * x1 + cfg.slope_x2 * x2 + cfg.noise * e;
        values.extend([lon, lat, x1, x2, y]);
    }
    Ok(NumericTable {
        header: Some(["lon", "lat", "x1", "x2", "y"].iter().map(|s| s.to_string()).collect()),
        matrix: OutcomeMatrix::new(cfg.n, 5, values)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_quantile() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_linear(&v, 0.5), 3.0);
        assert!((quantile_linear(&v, 0.98) - 4.92).abs() < 1e-12);
    }

    #[test]
    fn metric_ordering() {
        let mut rng = rng::stream(4, 0);
        for n in [1usize, 7, 50, 333] {
            let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
            let m = error_metrics(&e).unwrap();
            assert!(m.cvar2 >= m.p98 - 1e-12 && m.p98 >= m.mae - 1e-12, "{m:?}");
            assert!(m.rmse >= m.mae - 1e-12);
        }
    }

    #[test]
    fn split_sizes_and_order() {
        let t = generate_shift_data(&ShiftConfig { n: 1000, ..ShiftConfig::default() }, 1).unwrap();
        let cfg = ShiftConfig::default().split_config();
        let p = prepare(&t, &cfg).unwrap();
        assert_eq!(p.train.len(), 500);
        assert_eq!(p.n_gap, 300);
        assert_eq!(p.test.len(), 200);
        // East first: every training longitude exceeds every test longitude
        let min_train = p.train.iter().map(|&i| p.lon[i]).fold(f64::INFINITY, f64::min);
        let max_test = p.test.iter().map(|&i| p.lon[i]).fold(f64::NEG_INFINITY, f64::max);
        assert!(min_train > max_test);
        // features standardized on the training rows
        for j in 0..2 {
            let c: Vec<f64> = p.train.iter().map(|&i| p.xy.row(i)[j]).collect();
            let (m, s) = mean_sd(&c);
            assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_cover_blocks() {
        let mut rng = rng::stream(9, 0);
        let lon: Vec<f64> = (0..500).map(|_| rng.random()).collect();
        let lat: Vec<f64> = (0..500).map(|_| rng.random()).collect();
        let (f, nb) = geo_block_folds(&lon, &lat, 6, 3, 1).unwrap();
        assert_eq!(nb, 36);
        for k in 0..3 {
            assert!(f.iter().any(|&x| x == k));
        }
        // rows of one cell share a fold
        let range = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let ((a, b), (c, d)) = (range(&lon), range(&lat));
        let mut fold_of_cell = std::collections::HashMap::new();
        for i in 0..500 {
            let cell = (bin(lon[i], a, b, 6), bin(lat[i], c, d, 6));
            assert_eq!(*fold_of_cell.entry(cell).or_insert(f[i]), f[i]);
        }
    }

    #[test]
    fn noiseless_erm_is_exact() {
        let cfg = ShiftConfig {
            n: 600,
            slope_west: 1.3,
            slope_east: 1.3,
            noise: 0.0,
            ..ShiftConfig::default()
        };
        let t = generate_shift_data(&cfg, 2).unwrap();
        let split = RegressionSplitConfig {
            gap: 0.0,
            solver: SolveOptions::with_tol(1e-10),
            ..cfg.split_config()
        };
        let r = run_regression_on_table(&t, &split, &[RegressionMethod::Erm, RegressionMethod::Cvar], 1).unwrap();
        for m in &r.metrics {
            assert!(m.mae <= 1e-6, "{m:?}");
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let t = generate_shift_data(&ShiftConfig { n: 100, ..ShiftConfig::default() }, 1).unwrap();
        let cfg = RegressionSplitConfig::default();
        let e = run_regression_on_table(&t, &cfg, &[RegressionMethod::Erm], 1).unwrap_err();
        assert!(e.to_string().contains("column"), "{e}");
    }
}
