//! Multivariate newsvendor with Student-t demand and spike contamination at
//! test time.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_grid, mean_sd};
use crate::calibrate::{calibrate, Geometry};
use crate::centres::{
    fit_student_t_gibbs, rejection_sample_bulk, sample_centre, CentreSampler, GibbsConfig, StudentTPredictive,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{msd, BulkSet, DecisionLoss, OutcomeMatrix};
use crate::rng::{self, child_seed};
use crate::solve::{build_kl_bdro_objective, build_lv_objective, minimize, ObjectiveOracle, SolveOptions};
use crate::tolerances::TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NewsvendorMethod {
    Lv,
    KlBasPp,
    KlBdro,
    KlEmpirical,
}

impl NewsvendorMethod {
    pub const ALL: [NewsvendorMethod; 4] = [
        NewsvendorMethod::Lv,
        NewsvendorMethod::KlBasPp,
        NewsvendorMethod::KlBdro,
        NewsvendorMethod::KlEmpirical,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NewsvendorMethod::Lv => "lv",
            NewsvendorMethod::KlBasPp => "kl_bas_pp",
            NewsvendorMethod::KlBdro => "kl_bdro",
            NewsvendorMethod::KlEmpirical => "kl_empirical",
        }
    }

    fn grid<'a>(&self, cfg: &'a NewsvendorConfig) -> &'a [f64] {
        match self {
            NewsvendorMethod::Lv => &cfg.lv_grid,
            _ => &cfg.kl_grid,
        }
    }
}

impl fmt::Display for NewsvendorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `ε = 0` followed by `n` log-spaced values in `[0.005, 1]`.
pub fn default_lv_grid(n: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_grid(0.005, 1.0, n));
    g
}

/// `n − 2` log-spaced values in `[0.01, 25]` plus 5 and 10, sorted.
pub fn default_kl_grid(n: usize) -> Vec<f64> {
    let mut g = log_grid(0.01, 25.0, n.saturating_sub(2));
    g.extend([5.0, 10.0]);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewsvendorConfig {
    pub dim: usize,
    /// Student-t degrees of freedom.
    pub nu: f64,
    /// Common location of every coordinate.
    pub mean: f64,
    /// Scales are `scale·(1 + scale_step·(j − 1))`.
    pub scale: f64,
    pub scale_step: f64,
    /// Toeplitz correlation `ρ^{|i−j|}`.
    pub correlation: f64,
    pub holding: f64,
    pub backorder: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub replications: usize,
    /// Fraction of test rows replaced by spike draws.
    pub contamination: f64,
    /// Spike mean is `mean + spike_shift·σ_j`.
    pub spike_shift: f64,
    /// Spike covariance is `spike_cov_scale·Σ`.
    pub spike_cov_scale: f64,
    /// Predictive sample budget `M`.
    pub budget: usize,
    pub bdro_posterior: usize,
    pub bdro_predictive: usize,
    pub gamma: f64,
    pub delta: f64,
    /// Fraction of the training rows used to fit the bulk shape.
    pub fit_ratio: f64,
    pub burn_in: usize,
    pub lv_grid: Vec<f64>,
    pub kl_grid: Vec<f64>,
    pub solver: SolveOptions,
    /// Record wall-clock seconds in the output rows.
    pub timings: bool,
}

impl Default for NewsvendorConfig {
    fn default() -> Self {
        Self {
            dim: 5,
            nu: 3.0,
            mean: 30.0,
            scale: 10.0,
            scale_step: 0.1,
            correlation: 0.6,
            holding: 3.0,
            backorder: 8.0,
            n_train: 2000,
            n_test: 500,
            replications: 20,
            contamination: 0.2,
            spike_shift: 6.0,
            spike_cov_scale: 0.05,
            budget: 2500,
            bdro_posterior: 50,
            bdro_predictive: 50,
            gamma: 0.05,
            delta: 0.05,
            fit_ratio: 0.5,
            burn_in: crate::centres::DEFAULT_BURN_IN,
            lv_grid: default_lv_grid(24),
            kl_grid: default_kl_grid(24),
            solver: SolveOptions::default(),
            timings: false,
        }
    }
}

impl NewsvendorConfig {
    /// Replaces both tolerance grids with `n`-point defaults.
    pub fn with_grid_size(mut self, n: usize) -> Self {
        self.lv_grid = default_lv_grid(n);
        self.kl_grid = default_kl_grid(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.dim == 0 || self.n_train <= self.dim || self.n_test == 0 || self.replications == 0 {
            return bad(format!(
                "need dim >= 1, n_train > dim, n_test >= 1 and replications >= 1 (got {}, {}, {}, {})",
                self.dim, self.n_train, self.n_test, self.replications
            ));
        }
        if !(self.nu > 0.0 && self.scale > 0.0 && self.holding > 0.0 && self.backorder > 0.0) {
            return bad("nu, scale, holding and backorder must be positive".into());
        }
        if !(self.correlation.abs() < 1.0) {
            return bad(format!("correlation must lie in (-1, 1), got {}", self.correlation));
        }
        if !(0.0..=1.0).contains(&self.contamination) {
            return bad(format!("contamination must lie in [0, 1], got {}", self.contamination));
        }
        if !(self.spike_cov_scale > 0.0) {
            return bad("spike covariance scale must be positive".into());
        }
        if self.budget < 2 || self.bdro_posterior == 0 || self.bdro_predictive == 0 {
            return bad("budgets must be positive (and M >= 2)".into());
        }
        if self.lv_grid.is_empty() || self.kl_grid.is_empty() {
            return bad("tolerance grids must be nonempty".into());
        }
        if self.lv_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("LV tolerances must lie in [0, 1]".into());
        }
        if self.kl_grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return bad("KL radii must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Per-coordinate scales `s_j`.
    pub fn scales(&self) -> Vec<f64> {
        (0..self.dim).map(|j| self.scale * (1.0 + self.scale_step * j as f64)).collect()
    }

    /// Scale matrix `Σ = D·R·D`.
    pub fn scale_matrix(&self) -> DMatrix<f64> {
        let s = self.scales();
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            s[i] * s[j] * self.correlation.powi((i as i32 - j as i32).abs())
        })
    }

    fn loss(&self) -> Result<DecisionLoss> {
        DecisionLoss::newsvendor(self.holding, self.backorder, self.dim)
    }
}

/// Training and test demand plus the spike indicator of each test row.
#[derive(Clone, Debug, PartialEq)]
pub struct NewsvendorData {
    pub train: OutcomeMatrix,
    pub test: OutcomeMatrix,
    pub spike: Vec<bool>,
}

pub fn generate_newsvendor_sample(cfg: &NewsvendorConfig, seed: u64) -> Result<NewsvendorData> {
    cfg.validate()?;
    let d = cfg.dim;
    let sigma = cfg.scale_matrix();
    let l = linalg::cholesky_lower(&sigma)?;
    let spike_l = l.scale(cfg.spike_cov_scale.sqrt());
    let mu = vec![cfg.mean; d];
    let spike_mu: Vec<f64> = cfg.scales().iter().map(|s| cfg.mean + cfg.spike_shift * s).collect();
    let chi = ChiSquared::new(cfg.nu).map_err(|e| Error::invalid(e.to_string()))?;

    let t_draw = |rng: &mut rng::Rng, out: &mut Vec<f64>| {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let w = (cfg.nu / chi.sample(rng)).sqrt();
        out.extend(mu.iter().zip(linalg::l_mul(&l, &z)).map(|(m, v)| m + w * v));
    };

    let mut rng = rng::stream(seed, 0);
    let mut train = Vec::with_capacity(cfg.n_train * d);
    for _ in 0..cfg.n_train {
        t_draw(&mut rng, &mut train);
    }
    let mut rng = rng::stream(seed, 1);
    let mut test = Vec::with_capacity(cfg.n_test * d);
    let mut spike = Vec::with_capacity(cfg.n_test);
    for _ in 0..cfg.n_test {
        let is_spike = rng.random::<f64>() < cfg.contamination;
        if is_spike {
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            test.extend(spike_mu.iter().zip(linalg::l_mul(&spike_l, &z)).map(|(m, v)| m + v));
        } else {
            t_draw(&mut rng, &mut test);
        }
        spike.push(is_spike);
    }
    Ok(NewsvendorData {
        train: OutcomeMatrix::new(cfg.n_train, d, train)?,
        test: OutcomeMatrix::new(cfg.n_test, d, test)?,
        spike,
    })
}

/// Clean Student-t training demand and spike-contaminated test demand.
pub fn generate_newsvendor_data(cfg: &NewsvendorConfig, seed: u64) -> Result<(OutcomeMatrix, OutcomeMatrix)> {
    let s = generate_newsvendor_sample(cfg, seed)?;
    Ok((s.train, s.test))
}

/// One replication's out-of-sample result at one tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub method: NewsvendorMethod,
    pub replication: usize,
    pub tolerance: f64,
    pub oos_mean: f64,
    pub oos_sd: f64,
    pub msd: f64,
    /// In-sample robust objective at the minimizer.
    pub objective: f64,
    pub certified_gap: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_seconds: Option<f64>,
}

/// Replication-averaged frontier point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierSummary {
    pub method: NewsvendorMethod,
    pub tolerance: f64,
    pub replications: usize,
    pub oos_mean: f64,
    pub oos_sd: f64,
    /// `(oos_mean + oos_sd)/2`, equal to the average per-replication MSD.
    pub msd: f64,
    /// Standard deviation of the per-replication MSD.
    pub msd_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_seconds: Option<f64>,
}

/// Per-replication calibration record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationInfo {
    pub replication: usize,
    pub bulk_threshold: f64,
    pub selection_m: usize,
    pub spike_rows: usize,
    pub lv_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsvendorRun {
    pub rows: Vec<FrontierRow>,
    pub summary: Vec<FrontierSummary>,
    pub replications: Vec<ReplicationInfo>,
}

impl NewsvendorRun {
    pub fn curve(&self, method: NewsvendorMethod) -> Vec<&FrontierSummary> {
        self.summary.iter().filter(|s| s.method == method).collect()
    }

    /// Smallest replication-averaged MSD over the method's grid.
    pub fn min_msd(&self, method: NewsvendorMethod) -> Option<f64> {
        self.curve(method).iter().map(|s| s.msd).min_by(f64::total_cmp)
    }
}

/// Everything a replication shares across methods.
struct Prepared {
    data: NewsvendorData,
    bulk: BulkSet,
    threshold: f64,
    selection_m: usize,
    predictive: StudentTPredictive,
    likelihood_seconds: f64,
}

const TAG_DATA: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_GIBBS: u64 = 3;
const TAG_DRAWS: u64 = 4;
const TAG_BDRO: u64 = 5;

fn prepare(cfg: &NewsvendorConfig, rep_seed: u64, retained: usize) -> Result<Prepared> {
    let data = generate_newsvendor_sample(cfg, child_seed(rep_seed, TAG_DATA))?;
    let start = Instant::now();
    let cal = calibrate(
        &data.train,
        Geometry::Ellipsoid,
        cfg.gamma,
        cfg.delta,
        cfg.fit_ratio,
        child_seed(rep_seed, TAG_SPLIT),
    )?;
    let bulk = cal.bulk()?;
    let gibbs = GibbsConfig {
        nu: cfg.nu,
        prior: None,
        iters: cfg.burn_in + retained,
        burn_in: cfg.burn_in,
        ridge: TOL.gibbs_ridge,
    };
    let predictive = match fit_student_t_gibbs(&data.train, &gibbs, child_seed(rep_seed, TAG_GIBBS))? {
        CentreSampler::StudentTPredictive(p) => p,
        _ => unreachable!("Gibbs fitting returns a Student-t predictive"),
    };
    Ok(Prepared {
        data,
        bulk,
        threshold: cal.result.threshold,
        selection_m: cal.result.m,
        predictive,
        likelihood_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Nearest balanced `(M_post, M_pred)` with `M_post·M_pred ≈ m`.
pub fn balanced_pair(m: usize) -> (usize, usize) {
    let p = ((m as f64).sqrt().round() as usize).max(1);
    let q = ((m as f64 / p as f64).round() as usize).max(1);
    (p, q)
}

fn truncated(p: &StudentTPredictive, states: usize) -> CentreSampler {
    let mut q = p.clone();
    q.states.truncate(states.max(1));
    CentreSampler::StudentTPredictive(q)
}

/// Scenario sets for one method at budget `m` (`bdro` gives the KL-BDRO
/// allocation).
fn scenarios(
    method: NewsvendorMethod,
    prep: &Prepared,
    m: usize,
    bdro: (usize, usize),
    rep_seed: u64,
) -> Result<Vec<OutcomeMatrix>> {
    let draw_seed = child_seed(rep_seed, TAG_DRAWS);
    Ok(match method {
        NewsvendorMethod::Lv => {
            let pred = truncated(&prep.predictive, m);
            vec![rejection_sample_bulk(&pred, &prep.bulk, (m / 2).max(1), 2.0, draw_seed)?]
        }
        NewsvendorMethod::KlBasPp => vec![sample_centre(&truncated(&prep.predictive, m), m, draw_seed)?],
        NewsvendorMethod::KlBdro => {
            let (posterior, predictive) = bdro;
            let n_states = prep.predictive.states.len();
            let bdro_seed = child_seed(rep_seed, TAG_BDRO);
            (0..posterior)
                .map(|i| {
                    prep.predictive
                        .sample_state(i * n_states / posterior, predictive, child_seed(bdro_seed, i as u64))
                })
                .collect::<Result<Vec<_>>>()?
        }
        NewsvendorMethod::KlEmpirical => vec![prep.data.train.clone()],
    })
}

struct SweepPoint {
    tolerance: f64,
    objective: f64,
    gap: Option<f64>,
    converged: bool,
    iterations: usize,
    oos_mean: f64,
    oos_sd: f64,
    seconds: f64,
}

fn oos_costs(loss: &DecisionLoss, x: &[f64], test: &OutcomeMatrix) -> Vec<f64> {
    test.rows().map(|xi| loss.loss(x, xi)).collect()
}

/// Solves along the grid in order, warm-starting each solve at the previous
/// minimizer.
fn sweep(
    cfg: &NewsvendorConfig,
    method: NewsvendorMethod,
    draws: Vec<OutcomeMatrix>,
    bulk: &BulkSet,
    test: &OutcomeMatrix,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    let loss = cfg.loss()?;
    let mut out = Vec::with_capacity(grid.len());
    let mut x0: Option<Vec<f64>> = None;
    for &eps in grid {
        let annotate = |e: Error| e.context(format!("method {method}, tolerance {eps}"));
        let start = Instant::now();
        let oracle: Box<dyn ObjectiveOracle> = match method {
            NewsvendorMethod::Lv => Box::new(build_lv_objective(loss, draws[0].clone(), bulk.clone(), eps).map_err(annotate)?),
            _ => Box::new(build_kl_bdro_objective(loss, draws.clone(), eps).map_err(annotate)?),
        };
        let start_x = x0.clone().unwrap_or_else(|| oracle.initial_point());
        let rep = minimize(oracle.as_ref(), &start_x, &cfg.solver).map_err(annotate)?;
        let seconds = start.elapsed().as_secs_f64();
        let (oos_mean, oos_sd) = mean_sd(&oos_costs(&loss, &rep.minimizer, test));
        out.push(SweepPoint {
            tolerance: eps,
            objective: rep.objective,
            gap: rep.certified_gap,
            converged: rep.converged,
            iterations: rep.iterations,
            oos_mean,
            oos_sd,
            seconds,
        });
        x0 = Some(rep.minimizer);
    }
    Ok(out)
}

fn run_replication(
    cfg: &NewsvendorConfig,
    methods: &[NewsvendorMethod],
    r: usize,
    seed: u64,
) -> Result<(Vec<FrontierRow>, ReplicationInfo)> {
    let rep_seed = child_seed(seed, r as u64);
    let annotate = |e: Error| e.context(format!("replication {r}"));
    let mut prep = prepare(cfg, rep_seed, cfg.budget).map_err(annotate)?;
    let mut rows = Vec::new();
    let mut lv_samples = 0;
    for &method in methods {
        let start = Instant::now();
        let draws = scenarios(method, &prep, cfg.budget, (cfg.bdro_posterior, cfg.bdro_predictive), rep_seed)
            .map_err(|e| annotate(e.context(format!("method {method}"))))?;
        if method == NewsvendorMethod::Lv {
            lv_samples = draws[0].n_rows();
            prep.likelihood_seconds += start.elapsed().as_secs_f64();
        }
        let points = sweep(cfg, method, draws, &prep.bulk, &prep.data.test, method.grid(cfg)).map_err(annotate)?;
        rows.extend(points.into_iter().map(|p| FrontierRow {
            method,
            replication: r,
            tolerance: p.tolerance,
            oos_mean: p.oos_mean,
            oos_sd: p.oos_sd,
            msd: msd(p.oos_mean, p.oos_sd),
            objective: p.objective,
            certified_gap: p.gap,
            converged: p.converged,
            iterations: p.iterations,
            solve_seconds: cfg.timings.then_some(p.seconds),
        }));
    }
    let info = ReplicationInfo {
        replication: r,
        bulk_threshold: prep.threshold,
        selection_m: prep.selection_m,
        spike_rows: prep.data.spike.iter().filter(|s| **s).count(),
        lv_samples,
        likelihood_seconds: cfg.timings.then_some(prep.likelihood_seconds),
    };
    Ok((rows, info))
}

fn summarize(rows: &[FrontierRow], methods: &[NewsvendorMethod], cfg: &NewsvendorConfig) -> Vec<FrontierSummary> {
    let mut out = Vec::new();
    for &method in methods {
        for &eps in method.grid(cfg) {
            let sel: Vec<&FrontierRow> = rows.iter().filter(|r| r.method == method && r.tolerance == eps).collect();
            let means: Vec<f64> = sel.iter().map(|r| r.oos_mean).collect();
            let sds: Vec<f64> = sel.iter().map(|r| r.oos_sd).collect();
            let msds: Vec<f64> = sel.iter().map(|r| r.msd).collect();
            let (m, _) = mean_sd(&means);
            let (s, _) = mean_sd(&sds);
            let solve_seconds = cfg.timings.then(|| sel.iter().filter_map(|r| r.solve_seconds).sum::<f64>() / sel.len() as f64);
            out.push(FrontierSummary {
                method,
                tolerance: eps,
                replications: sel.len(),
                oos_mean: m,
                oos_sd: s,
                msd: msd(m, s),
                msd_sd: mean_sd(&msds).1,
                solve_seconds,
            });
        }
    }
    out
}

fn check_methods(methods: &[NewsvendorMethod]) -> Result<Vec<NewsvendorMethod>> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    let mut m = methods.to_vec();
    m.sort();
    m.dedup();
    Ok(m)
}

/// Tolerance sweeps for each method over `cfg.replications` independent
/// replications, evaluated on the contaminated test set of each replication.
pub fn run_newsvendor_frontier(
    cfg: &NewsvendorConfig,
    methods: &[NewsvendorMethod],
    seed: u64,
) -> Result<NewsvendorRun> {
    cfg.validate()?;
    let methods = check_methods(methods)?;
    let per_rep = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, &methods, r, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut replications = Vec::new();
    for (r, info) in per_rep {
        rows.extend(r);
        replications.push(info);
    }
    rows.sort_by(|a, b| {
        (a.method, a.replication)
            .cmp(&(b.method, b.replication))
            .then(a.tolerance.total_cmp(&b.tolerance))
    });
    let summary = summarize(&rows, &methods, cfg);
    Ok(NewsvendorRun {
        rows,
        summary,
        replications,
    })
}

/// Replication-averaged MSD at one budget and tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetCurveRow {
    pub method: NewsvendorMethod,
    pub budget: usize,
    pub m_post: usize,
    pub m_pred: usize,
    pub tolerance: f64,
    pub oos_mean: f64,
    pub oos_sd: f64,
    pub msd: f64,
}

/// Mean absolute deviation of a method's MSD curve from its curve at the
/// largest budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub method: NewsvendorMethod,
    pub budget: usize,
    pub m_post: usize,
    pub m_pred: usize,
    /// False when the budget is not a perfect square and KL-BDRO used the
    /// nearest balanced pair instead.
    pub exact_allocation: bool,
    pub delta_msd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEfficiencyReport {
    pub curves: Vec<BudgetCurveRow>,
    pub deltas: Vec<DeltaRow>,
}

impl SampleEfficiencyReport {
    pub fn delta(&self, method: NewsvendorMethod, budget: usize) -> Option<f64> {
        self.deltas
            .iter()
            .find(|d| d.method == method && d.budget == budget)
            .map(|d| d.delta_msd)
    }
}

/// The budgets of the sample-efficiency study.
pub const DEFAULT_BUDGETS: [usize; 8] = [25, 100, 400, 900, 1600, 2500, 3600, 4900];

fn allocation(method: NewsvendorMethod, m: usize) -> (usize, usize) {
    match method {
        NewsvendorMethod::KlBdro => balanced_pair(m),
        NewsvendorMethod::KlEmpirical => (0, 0),
        _ => (1, m),
    }
}

/// Re-runs the tolerance sweep at each budget and reports how far each
/// method's replication-averaged MSD curve sits from its largest-budget
/// curve. The largest budget is the reference.
pub fn run_sample_efficiency(
    cfg: &NewsvendorConfig,
    budgets: &[usize],
    methods: &[NewsvendorMethod],
    seed: u64,
) -> Result<SampleEfficiencyReport> {
    cfg.validate()?;
    let methods = check_methods(methods)?;
    if methods.contains(&NewsvendorMethod::KlEmpirical) {
        return Err(Error::invalid("KL-Empirical has no sampling budget"));
    }
    let mut budgets = budgets.to_vec();
    budgets.sort_unstable();
    budgets.dedup();
    if budgets.first().is_none_or(|&b| b < 2) {
        return Err(Error::invalid("budgets must be nonempty and each at least 2"));
    }
    let m_max = *budgets.last().expect("nonempty");

    // (method, budget index, tolerance index) -> per-replication (mean, sd)
    let per_rep = (0..cfg.replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<(NewsvendorMethod, usize, Vec<(f64, f64)>)>> {
            let rep_seed = child_seed(seed, r as u64);
            let annotate = |e: Error| e.context(format!("replication {r}"));
            let prep = prepare(cfg, rep_seed, m_max).map_err(annotate)?;
            let mut out = Vec::new();
            for &method in &methods {
                for (bi, &m) in budgets.iter().enumerate() {
                    let draws = scenarios(method, &prep, m, allocation(method, m), rep_seed)
                        .map_err(|e| annotate(e.context(format!("method {method}, budget {m}"))))?;
                    let pts = sweep(cfg, method, draws, &prep.bulk, &prep.data.test, method.grid(cfg))
                        .map_err(|e| annotate(e.context(format!("budget {m}"))))?;
                    out.push((method, bi, pts.iter().map(|p| (p.oos_mean, p.oos_sd)).collect()));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::new();
    let mut deltas = Vec::new();
    for &method in &methods {
        let grid = method.grid(cfg);
        let curve_at = |bi: usize| -> Vec<(f64, f64, f64)> {
            (0..grid.len())
                .map(|k| {
                    let ms: Vec<(f64, f64)> = per_rep
                        .iter()
                        .flat_map(|rep| rep.iter().filter(|(mm, b, _)| *mm == method && *b == bi).map(|(_, _, v)| v[k]))
                        .collect();
                    let mean = ms.iter().map(|v| v.0).sum::<f64>() / ms.len() as f64;
                    let sd = ms.iter().map(|v| v.1).sum::<f64>() / ms.len() as f64;
                    (mean, sd, msd(mean, sd))
                })
                .collect()
        };
        let reference = curve_at(budgets.len() - 1);
        for (bi, &m) in budgets.iter().enumerate() {
            let c = curve_at(bi);
            let (m_post, m_pred) = allocation(method, m);
            for (k, &eps) in grid.iter().enumerate() {
                curves.push(BudgetCurveRow {
                    method,
                    budget: m,
                    m_post,
                    m_pred,
                    tolerance: eps,
                    oos_mean: c[k].0,
                    oos_sd: c[k].1,
                    msd: c[k].2,
                });
            }
            let delta = c.iter().zip(&reference).map(|(a, b)| (a.2 - b.2).abs()).sum::<f64>() / grid.len() as f64;
            deltas.push(DeltaRow {
                method,
                budget: m,
                m_post,
                m_pred,
                exact_allocation: m_post * m_pred == m,
                delta_msd: delta,
            });
        }
    }
    Ok(SampleEfficiencyReport { curves, deltas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NewsvendorConfig {
        NewsvendorConfig {
            dim: 2,
            n_train: 400,
            n_test: 200,
            replications: 2,
            budget: 200,
            bdro_posterior: 10,
            bdro_predictive: 20,
            burn_in: 50,
            gamma: 0.15,
            lv_grid: vec![0.0, 0.1, 0.5, 1.0],
            kl_grid: vec![0.1, 1.0, 5.0, 10.0],
            ..NewsvendorConfig::default()
        }
    }

    #[test]
    fn defaults_as_listed() {
        let c = NewsvendorConfig::default();
        assert_eq!(c.scales(), vec![10.0, 11.0, 12.0, 13.0, 14.0]);
        let s = c.scale_matrix();
        assert!((s[(0, 2)] - 10.0 * 12.0 * 0.36).abs() < 1e-12);
        assert_eq!(c.lv_grid.len(), 25);
        assert_eq!(c.lv_grid[0], 0.0);
        assert_eq!(*c.lv_grid.last().unwrap(), 1.0);
        assert_eq!(c.kl_grid.len(), 24);
        assert!(c.kl_grid.contains(&5.0) && c.kl_grid.contains(&10.0));
        assert_eq!(*c.kl_grid.last().unwrap(), 25.0);
    }

    #[test]
    fn clean_test_has_no_spikes() {
        let cfg = NewsvendorConfig {
            contamination: 0.0,
            ..NewsvendorConfig::default()
        };
        let d = generate_newsvendor_sample(&cfg, 3).unwrap();
        assert!(d.spike.iter().all(|s| !s));
    }

    #[test]
    fn spike_count_within_binomial_band() {
        let cfg = NewsvendorConfig::default();
        // 99% band for Binomial(500, 0.2): 100 ± 2.576·√80
        let half = 2.576 * 80f64.sqrt();
        let mut inside = 0;
        for seed in 0..40 {
            let d = generate_newsvendor_sample(&cfg, seed).unwrap();
            let k = d.spike.iter().filter(|s| **s).count() as f64;
            if (k - 100.0).abs() <= half {
                inside += 1;
            }
        }
        assert!(inside >= 37, "{inside}/40 inside the 99% band");
    }

    #[test]
    fn train_sd_matches_student_t() {
        let cfg = NewsvendorConfig::default();
        let (train, _) = generate_newsvendor_data(&cfg, 11).unwrap();
        // ν = 3 has no fourth moment, so a single sample SD is noisy; use
        // the median over seeds
        let mut sds: Vec<f64> = (0..9)
            .map(|s| mean_sd(&generate_newsvendor_data(&cfg, s).unwrap().0.column(0)).1)
            .collect();
        sds.sort_by(f64::total_cmp);
        let theory = 10.0 * 3f64.sqrt();
        assert!((sds[4] - theory).abs() < 0.15 * theory, "{} vs {theory}", sds[4]);
        assert_eq!(train.n_rows(), 2000);
    }

    #[test]
    fn spike_rows_sit_far_out() {
        let cfg = NewsvendorConfig::default();
        let d = generate_newsvendor_sample(&cfg, 5).unwrap();
        for (row, s) in d.test.rows().zip(&d.spike) {
            if *s {
                // spike mean is 90 in coordinate 0 with SD √0.05·10 ≈ 2.2
                assert!((row[0] - 90.0).abs() < 15.0);
            }
        }
    }

    #[test]
    fn balanced_pairs() {
        assert_eq!(balanced_pair(2500), (50, 50));
        assert_eq!(balanced_pair(25), (5, 5));
        assert_eq!(balanced_pair(50), (7, 7));
    }

    #[test]
    fn frontier_small_run() {
        let cfg = small();
        let run = run_newsvendor_frontier(&cfg, &NewsvendorMethod::ALL, 7).unwrap();
        assert_eq!(run.rows.len(), 2 * (4 + 4 * 3));
        for s in &run.summary {
            assert_eq!(s.msd, 0.5 * (s.oos_mean + s.oos_sd));
        }
        // LV in-sample objective is nondecreasing in the tolerance
        for r in 0..2 {
            let lv: Vec<f64> = run
                .rows
                .iter()
                .filter(|x| x.method == NewsvendorMethod::Lv && x.replication == r)
                .map(|x| x.objective)
                .collect();
            assert!(lv.windows(2).all(|w| w[1] >= w[0] - 1e-6 * (1.0 + w[0].abs())), "{lv:?}");
        }
        // radii 5 and 10 both exceed log 20, so KL-BDRO saturates
        let bdro: Vec<&FrontierSummary> = run.curve(NewsvendorMethod::KlBdro);
        assert_eq!(bdro[2].oos_mean, bdro[3].oos_mean);
        assert_eq!(bdro[2].oos_sd, bdro[3].oos_sd);
    }

    #[test]
    fn frontier_is_deterministic() {
        let cfg = NewsvendorConfig {
            replications: 1,
            ..small()
        };
        let a = run_newsvendor_frontier(&cfg, &[NewsvendorMethod::Lv], 1).unwrap();
        let b = run_newsvendor_frontier(&cfg, &[NewsvendorMethod::Lv], 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_efficiency_reference_is_zero() {
        let cfg = NewsvendorConfig {
            replications: 1,
            ..small()
        };
        let rep = run_sample_efficiency(&cfg, &[25, 100], &[NewsvendorMethod::Lv, NewsvendorMethod::KlBdro], 2).unwrap();
        assert_eq!(rep.delta(NewsvendorMethod::Lv, 100), Some(0.0));
        assert_eq!(rep.delta(NewsvendorMethod::KlBdro, 100), Some(0.0));
        assert!(rep.deltas.iter().all(|d| d.delta_msd >= 0.0));
        assert!(rep.deltas.iter().all(|d| d.exact_allocation));
    }
}
