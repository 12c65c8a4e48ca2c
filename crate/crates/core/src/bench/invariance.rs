//! Tolerance invariance of LV-LAD under a joint ellipsoid aligned with an
//! elliptical centre, contrasted with the feature-ellipsoid × target-interval
//! product bulk.
//!
//! The centre is a known Gaussian law of `(X, Y)`. With the joint ellipsoid
//! built from the centre's own covariance both the in-bulk mean and the
//! in-bulk supremum of `|y − wᵀx − b₀|` are minimized by the population
//! regression coefficient `Σ_XX⁻¹Σ_XY`, so the LV minimizer does not move
//! with ε. The product bulk decouples the two blocks and its supremum
//! penalizes the slope, so the minimizer shrinks as ε grows.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{self, norm2};
use crate::model::{BulkBlock, BulkSet, DecisionLoss, OutcomeMatrix};
use crate::rng;
use crate::solve::{build_lv_objective, minimize_default, SolveOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceConfig {
    /// Mean of `(X, Y)`, target last.
    pub mean: Vec<f64>,
    /// Covariance rows of `(X, Y)`.
    pub covariance: Vec<Vec<f64>>,
    /// Bulk mass level of the joint ellipsoid; the product bulk splits the
    /// complement evenly between its two blocks.
    pub gamma: f64,
    /// In-bulk SAA sample size.
    pub samples: usize,
    pub tolerances: Vec<f64>,
    pub solver: SolveOptions,
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        Self {
            mean: vec![1.0, -0.5, 2.0],
            covariance: vec![
                vec![1.0, 0.3, 0.8],
                vec![0.3, 2.0, -0.6],
                vec![0.8, -0.6, 1.5],
            ],
            gamma: 0.05,
            samples: 50_000,
            tolerances: vec![0.1, 0.5, 0.9],
            solver: SolveOptions::with_tol(1e-8),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    /// `joint` or `product`.
    pub bulk: String,
    pub tolerance: f64,
    pub slope: Vec<f64>,
    pub intercept: f64,
    /// `‖ŵ − β‖/‖β‖` with `β = Σ_XX⁻¹Σ_XY`.
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceStudy {
    pub beta: Vec<f64>,
    pub rows: Vec<InvarianceRow>,
    /// Largest `‖ŵ_ε − ŵ_ε'‖/‖β‖` over tolerance pairs, per bulk.
    pub joint_spread: f64,
    pub product_spread: f64,
}

impl InvarianceStudy {
    pub fn max_joint_error(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.bulk == "joint")
            .map(|r| r.rel_error)
            .fold(0.0, f64::max)
    }
}

fn spread(slopes: &[Vec<f64>], scale: f64) -> f64 {
    let mut s: f64 = 0.0;
    for a in slopes {
        for b in slopes {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            s = s.max(norm2(&d) / scale);
        }
    }
    s
}

pub fn run_invariance_study(cfg: &InvarianceConfig, seed: u64) -> Result<InvarianceStudy> {
    let k = cfg.mean.len();
    if k < 2 || cfg.covariance.len() != k || cfg.covariance.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("mean and covariance must describe (X, Y) with at least one feature"));
    }
    if cfg.samples == 0 || cfg.tolerances.is_empty() {
        return Err(Error::invalid("need samples and tolerances"));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(Error::invalid("gamma must lie in (0, 1)"));
    }
    let p = k - 1;
    let sigma = DMatrix::from_fn(k, k, |i, j| cfg.covariance[i][j]);
    let l = linalg::cholesky_lower(&sigma)?;
    let sxx = sigma.view((0, 0), (p, p)).into_owned();
    let sxy = DVector::from_fn(p, |i, _| sigma[(i, p)]);
    let beta: Vec<f64> = sxx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("feature covariance is not positive definite"))?
        .solve(&sxy)
        .iter()
        .copied()
        .collect();
    let beta_norm = norm2(&beta).max(f64::MIN_POSITIVE);

    let chi = |df: f64, q: f64| -> Result<f64> {
        Ok(ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?.inverse_cdf(q).sqrt())
    };
    let joint = BulkSet::ellipsoid(cfg.mean.clone(), l.clone(), chi(k as f64, 1.0 - cfg.gamma)?)?;
    let lx = linalg::cholesky_lower(&sxx)?;
    let half = cfg.gamma / 2.0;
    let ry = Normal::standard().inverse_cdf(1.0 - half / 2.0);
    let product = BulkSet::product(vec![
        BulkBlock {
            indices: (0..p).collect(),
            set: BulkSet::ellipsoid(cfg.mean[..p].to_vec(), lx, chi(p as f64, 1.0 - half)?)?,
        },
        BulkBlock {
            indices: vec![p],
            set: BulkSet::boxed(vec![cfg.mean[p]], vec![sigma[(p, p)].sqrt()], ry)?,
        },
    ])?;

    let loss = DecisionLoss::lad(p)?;
    let mut rows = Vec::new();
    let mut spreads = Vec::new();
    for (name, bulk, stream) in [("joint", &joint, 0u64), ("product", &product, 1)] {
        let mut rng = rng::stream(seed, stream);
        let mut vals = Vec::with_capacity(cfg.samples * k);
        let mut accepted = 0;
        let mut z = vec![0.0; k];
        while accepted < cfg.samples {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let xi: Vec<f64> = cfg.mean.iter().zip(linalg::l_mul(&l, &z)).map(|(m, v)| m + v).collect();
            if bulk.contains(&xi) {
                vals.extend(xi);
                accepted += 1;
            }
        }
        let samples = OutcomeMatrix::new(cfg.samples, k, vals)?;
        let mut slopes = Vec::new();
        for &eps in &cfg.tolerances {
            let obj = build_lv_objective(loss, samples.clone(), bulk.clone(), eps)?;
            let rep = minimize_default(&obj, &cfg.solver).map_err(|e| e.context(format!("{name} bulk, tolerance {eps}")))?;
            let w = rep.minimizer[..p].to_vec();
            let diff: Vec<f64> = w.iter().zip(&beta).map(|(a, b)| a - b).collect();
            rows.push(InvarianceRow {
                bulk: name.to_string(),
                tolerance: eps,
                intercept: rep.minimizer[p],
                rel_error: norm2(&diff) / beta_norm,
                slope: w.clone(),
            });
            slopes.push(w);
        }
        spreads.push(spread(&slopes, beta_norm));
    }
    Ok(InvarianceStudy {
        beta,
        rows,
        joint_spread: spreads[0],
        product_spread: spreads[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance_shows_invariance() {
        let cfg = InvarianceConfig {
            samples: 5000,
            ..InvarianceConfig::default()
        };
        let s = run_invariance_study(&cfg, 1).unwrap();
        assert_eq!(s.rows.len(), 6);
        assert!(s.max_joint_error() < 0.1, "{:?}", s.rows);
        assert!(s.product_spread > s.joint_spread);
    }
}
