//! Score fitting, DKW-certified threshold selection and tolerance diagnostics.
//!
//! A score `s(ξ)` is fitted on one half of the data, scored on the other
//! half, and the threshold is the order statistic that the DKW band
//! certifies to enclose at least `1 − γ` of the true mass with probability
//! at least `1 − δ`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, matrix_rows};
use crate::model::{align_supports, BulkSet, DiscreteDistribution, OutcomeMatrix};
use crate::rng;
use crate::tolerances::TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Ellipsoid,
    Box,
}

/// Scalar score whose sublevel sets are the bulk sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreFunction {
    /// `‖L⁻¹(ξ − center)‖₂`
    Mahalanobis {
        center: Vec<f64>,
        #[serde(with = "matrix_rows")]
        factor: DMatrix<f64>,
    },
    /// `max_i |ξ_i − center_i| / w_i`
    ScaledBox { center: Vec<f64>, widths: Vec<f64> },
}

impl ScoreFunction {
    pub fn dim(&self) -> usize {
        match self {
            ScoreFunction::Mahalanobis { center, .. } | ScoreFunction::ScaledBox { center, .. } => {
                center.len()
            }
        }
    }

    pub fn score(&self, xi: &[f64]) -> f64 {
        match self {
            ScoreFunction::Mahalanobis { center, factor } => {
                let diff: Vec<f64> = xi.iter().zip(center).map(|(x, m)| x - m).collect();
                linalg::norm2(&linalg::solve_lower(factor, &diff))
            }
            ScoreFunction::ScaledBox { center, widths } => xi
                .iter()
                .zip(center)
                .zip(widths)
                .map(|((x, m), w)| (x - m).abs() / w)
                .fold(0.0, f64::max),
        }
    }

    pub fn scores(&self, data: &OutcomeMatrix) -> Result<Vec<f64>> {
        check_dim(self.dim(), data.n_cols())?;
        Ok(data.rows().map(|r| self.score(r)).collect())
    }

    /// The sublevel set `{ξ : s(ξ) ≤ t}`.
    pub fn bulk(&self, t: f64) -> Result<BulkSet> {
        match self {
            ScoreFunction::Mahalanobis { center, factor } => {
                BulkSet::ellipsoid(center.clone(), factor.clone(), t)
            }
            ScoreFunction::ScaledBox { center, widths } => {
                BulkSet::boxed(center.clone(), widths.clone(), t)
            }
        }
    }
}

pub fn fit_score(data_fit: &OutcomeMatrix, geometry: Geometry) -> Result<ScoreFunction> {
    fit_score_with_ridge(data_fit, geometry, TOL.covariance_ridge)
}

pub fn fit_score_with_ridge(
    data_fit: &OutcomeMatrix,
    geometry: Geometry,
    ridge: f64,
) -> Result<ScoreFunction> {
    let (n, d) = (data_fit.n_rows(), data_fit.n_cols());
    if n < d + 1 {
        return Err(Error::invalid(format!(
            "score fitting needs at least d + 1 = {} rows, got {n}",
            d + 1
        )));
    }
    let (center, mut cov) = linalg::sample_covariance(data_fit.values(), d);
    match geometry {
        Geometry::Ellipsoid => {
            for i in 0..d {
                cov[(i, i)] += ridge;
            }
            let factor = linalg::cholesky_lower(&cov)
                .map_err(|e| e.context("fitting the ellipsoid score"))?;
            Ok(ScoreFunction::Mahalanobis { center, factor })
        }
        Geometry::Box => {
            let widths = (0..d).map(|i| cov[(i, i)].sqrt().max(ridge)).collect();
            Ok(ScoreFunction::ScaledBox { center, widths })
        }
    }
}

/// `√(log(2/δ)/(2m))`
pub fn dkw_radius(m: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * m as f64)).sqrt()
}

/// Smallest `m` with `dkw_radius(m, δ) ≤ γ`.
pub fn min_certifying_samples(gamma: f64, delta: f64) -> usize {
    let mut m = ((2.0 / delta).ln() / (2.0 * gamma * gamma)).ceil().max(1.0) as usize;
    // guard the closed form against rounding at the boundary
    while m > 1 && dkw_radius(m - 1, delta) <= gamma {
        m -= 1;
    }
    while dkw_radius(m, delta) > gamma {
        m += 1;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub gamma: f64,
    pub delta: f64,
    pub m: usize,
    pub r_m_delta: f64,
    /// One-based order-statistic index `j*`; `m` when uncertified.
    pub selected_index: usize,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl CalibrationResult {
    /// Smallest `γ` that the same selection sample could certify.
    pub fn smallest_certifiable_gamma(&self) -> f64 {
        self.r_m_delta
    }

    pub fn require_certified(&self) -> Result<()> {
        if self.certified {
            Ok(())
        } else {
            Err(Error::Uncertified {
                gamma: self.gamma,
                smallest: self.r_m_delta,
            })
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// DKW threshold selection on held-out scores.
///
/// When `γ` is below the DKW radius no certificate exists; the result is
/// then marked uncertified, its threshold is the maximum score and its
/// message names the smallest certifiable `γ`.
pub fn select_threshold(scores: &[f64], gamma: f64, delta: f64) -> Result<CalibrationResult> {
    if scores.is_empty() {
        return Err(Error::invalid("selection scores are empty"));
    }
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("selection scores contain NaN"));
    }
    let m = scores.len();
    let r = dkw_radius(m, delta);
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    if gamma < r {
        return Ok(CalibrationResult {
            threshold: sorted[m - 1],
            gamma,
            delta,
            m,
            r_m_delta: r,
            selected_index: m,
            certified: false,
            message: Some(format!(
                "no certificate at gamma = {gamma}: smallest certifiable gamma is {r}"
            )),
        });
    }
    let raw = m as f64 * (1.0 - gamma + r);
    let j = ((raw - TOL.order_index_slack).ceil() as usize).clamp(1, m);
    Ok(CalibrationResult {
        threshold: sorted[j - 1],
        gamma,
        delta,
        m,
        r_m_delta: r,
        selected_index: j,
        certified: true,
        message: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockwiseCalibration {
    pub blocks: Vec<CalibrationResult>,
    /// `Σγ_i`: the intersection keeps mass at least `1 − Σγ_i` ...
    pub gamma_total: f64,
    /// ... with probability at least `1 − Σδ_i`.
    pub delta_total: f64,
    pub certified: bool,
}

pub fn calibrate_blockwise(
    block_scores: &[Vec<f64>],
    budgets: &[(f64, f64)],
) -> Result<BlockwiseCalibration> {
    if block_scores.is_empty() {
        return Err(Error::invalid("blockwise calibration needs at least one block"));
    }
    check_dim(block_scores.len(), budgets.len())?;
    let blocks = block_scores
        .iter()
        .zip(budgets)
        .enumerate()
        .map(|(i, (s, &(g, d)))| {
            select_threshold(s, g, d).map_err(|e| e.context(format!("block {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockwiseCalibration {
        certified: blocks.iter().all(|b| b.certified),
        gamma_total: budgets.iter().map(|b| b.0).sum(),
        delta_total: budgets.iter().map(|b| b.1).sum(),
        blocks,
    })
}

/// Seeded random split of `0..n` into a fit part of `⌊ratio·n⌉` rows and a
/// selection part holding the rest. Both parts are returned sorted.
pub fn split_indices(n: usize, fit_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fit_ratio > 0.0 && fit_ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1), got {fit_ratio}")));
    }
    let n_fit = (fit_ratio * n as f64).round() as usize;
    if n_fit == 0 || n_fit == n {
        return Err(Error::invalid(format!(
            "split ratio {fit_ratio} leaves an empty part for n = {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0));
    let mut fit = idx[..n_fit].to_vec();
    let mut sel = idx[n_fit..].to_vec();
    fit.sort_unstable();
    sel.sort_unstable();
    Ok((fit, sel))
}

/// Fitted score plus its selection-sample certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub score: ScoreFunction,
    pub result: CalibrationResult,
    /// Held-out scores the threshold was selected from.
    #[serde(skip)]
    pub selection_scores: Vec<f64>,
}

impl Calibration {
    /// The certified bulk set, or [`Error::Uncertified`].
    pub fn bulk(&self) -> Result<BulkSet> {
        self.result.require_certified()?;
        self.score.bulk(self.result.threshold)
    }
}

/// Split, fit the score on one part and select the threshold on the other.
pub fn calibrate(
    data: &OutcomeMatrix,
    geometry: Geometry,
    gamma: f64,
    delta: f64,
    fit_ratio: f64,
    seed: u64,
) -> Result<Calibration> {
    let (fit, sel) = split_indices(data.n_rows(), fit_ratio, seed)?;
    calibrate_split(&data.select_rows(&fit)?, &data.select_rows(&sel)?, geometry, gamma, delta)
}

pub fn calibrate_split(
    data_fit: &OutcomeMatrix,
    data_select: &OutcomeMatrix,
    geometry: Geometry,
    gamma: f64,
    delta: f64,
) -> Result<Calibration> {
    let score = fit_score(data_fit, geometry)?;
    let selection_scores = score.scores(data_select)?;
    let result = select_threshold(&selection_scores, gamma, delta)?;
    Ok(Calibration {
        score,
        result,
        selection_scores,
    })
}

/// Inputs of the score-based lower bound on the centre mismatch `ε_c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDiagnostics {
    /// Increasing thresholds `t_1 < … < t_K`; `t_K` is the bulk threshold.
    pub thresholds: Vec<f64>,
    /// Training-law empirical CDF at each threshold.
    pub p_star: Vec<f64>,
    /// Centre empirical CDF at each threshold.
    pub p_centre: Vec<f64>,
    pub gamma: f64,
    pub delta: f64,
    /// Training selection-sample size.
    pub m: usize,
    /// Centre sample size.
    pub n_centre: usize,
}

pub const DEFAULT_DIAGNOSTIC_GRID: usize = 20;

impl EpsilonDiagnostics {
    /// Builds the diagnostic on a grid of `k` equally spaced empirical
    /// quantiles of the training scores, capped at the bulk threshold.
    pub fn from_scores(
        train_scores: &[f64],
        centre_scores: &[f64],
        bulk_threshold: f64,
        gamma: f64,
        delta: f64,
        k: usize,
    ) -> Result<Self> {
        if train_scores.is_empty() || centre_scores.is_empty() || k == 0 {
            return Err(Error::invalid("diagnostic needs nonempty score samples and k >= 1"));
        }
        let mut sorted = train_scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let mut thresholds: Vec<f64> = (1..=k)
            .map(|i| {
                let j = ((i as f64 / k as f64) * m as f64).ceil() as usize;
                sorted[j.clamp(1, m) - 1].min(bulk_threshold)
            })
            .collect();
        thresholds.push(bulk_threshold);
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
        Ok(Self {
            p_star: thresholds.iter().map(|&t| ecdf(train_scores, t)).collect(),
            p_centre: thresholds.iter().map(|&t| ecdf(centre_scores, t)).collect(),
            thresholds,
            gamma,
            delta,
            m,
            n_centre: centre_scores.len(),
        })
    }
}

/// Lower bound on `ε_c` valid with probability at least `1 − δ`.
///
/// Both DKW radii are taken at level `δ/2` so the two bands hold jointly.
pub fn eps_c_lower_bound(diag: &EpsilonDiagnostics) -> f64 {
    let k = diag.thresholds.len();
    if k == 0 || diag.p_star.len() != k || diag.p_centre.len() != k || diag.m == 0 || diag.n_centre == 0 {
        return 0.0;
    }
    let r_m = dkw_radius(diag.m, diag.delta / 2.0);
    let r_c = dkw_radius(diag.n_centre, diag.delta / 2.0);
    let pg_k = diag.p_centre[k - 1];
    let mut best = 0.0f64;
    for (ps, pg) in diag.p_star.iter().zip(&diag.p_centre) {
        if *pg > r_c {
            let v = 1.0 - (ps + r_m) * (pg_k + r_c) / ((1.0 - diag.gamma) * (pg - r_c));
            best = best.max(v);
        }
    }
    best.clamp(0.0, 1.0)
}

/// `1 − min_{i: p_i > 0} q_i/p_i` on the union of the two supports.
pub fn lv_distortion_discrete<A: Clone + PartialEq>(
    q: &DiscreteDistribution<A>,
    p: &DiscreteDistribution<A>,
) -> f64 {
    let (_, pp, qq) = align_supports(p, q);
    let min_ratio = pp
        .iter()
        .zip(&qq)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| qi / pi)
        .fold(f64::INFINITY, f64::min);
    (1.0 - min_ratio).max(0.0)
}

pub const MAX_BRUTEFORCE_ATOMS: usize = 20;

/// `sup_{A: P(A) > 0} (P(A) − Q(A))/P(A)` by enumerating every event.
pub fn lv_distortion_bruteforce<A: Clone + PartialEq>(
    q: &DiscreteDistribution<A>,
    p: &DiscreteDistribution<A>,
) -> Result<f64> {
    let (_, pp, qq) = align_supports(p, q);
    let n = pp.len();
    if n > MAX_BRUTEFORCE_ATOMS {
        return Err(Error::invalid(format!(
            "brute-force distortion supports at most {MAX_BRUTEFORCE_ATOMS} atoms, got {n}"
        )));
    }
    // Each event is summed afresh, as differences p_i − q_i, so an event of
    // tiny P-mass does not inherit rounding from larger ones.
    let mut best = f64::NEG_INFINITY;
    for mask in 1u64..(1u64 << n) {
        let (mut pa, mut da) = (0.0, 0.0);
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            pa += pp[i];
            da += pp[i] - qq[i];
        }
        if pa > 0.0 {
            best = best.max(da / pa);
        }
    }
    Ok(best.max(0.0))
}
