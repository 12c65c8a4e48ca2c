//! Worst-case risks over contamination neighbourhoods.
//!
//! Forward LV (Huber contamination) risk is `(1 − ε)·mean + ε·sup`, the
//! reverse LV risk is a CVaR, and the TV risk combines the two. The in-bulk
//! supremum of a piecewise-affine loss has a closed form for every bulk
//! geometry. Brute-force discrete oracles live alongside for cross-checks.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{BulkSet, DiscreteDistribution, OutcomeMatrix, PiecewiseAffineLoss};
use crate::rng::Rng;
use crate::tolerances::TOL;

/// `max_j [b_j + sup_{ξ ∈ S} a_jᵀξ]` and the attaining piece (smallest index
/// on ties).
pub fn sup_over_bulk(loss: &PiecewiseAffineLoss, bulk: &BulkSet) -> Result<(f64, usize)> {
    check_dim(bulk.dim(), loss.dim())?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, piece) in loss.pieces().iter().enumerate() {
        let v = piece.offset + bulk.support_value(&piece.slope);
        if v > best.0 {
            best = (v, j);
        }
    }
    Ok(best)
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("tolerance must lie in [0, 1], got {eps}")))
    }
}

/// Forward LV worst-case risk `(1 − ε)·mean + ε·sup`.
pub fn lv_risk(eps: f64, in_bulk_mean: f64, in_bulk_sup: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok((1.0 - eps) * in_bulk_mean + eps * in_bulk_sup)
}

fn check_weights(losses: &[f64], weights: &[f64]) -> Result<()> {
    check_dim(losses.len(), weights.len())?;
    if losses.is_empty() {
        return Err(Error::invalid("loss sample is empty"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > TOL.prob_sum {
        return Err(Error::invalid(format!("weights sum to {s}, not 1")));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("losses must be finite"));
    }
    Ok(())
}

/// Average of the worst `tail`-fraction of the loss distribution.
///
/// Losses are sorted in decreasing order and weight is accumulated until it
/// reaches `tail`; the atom on the boundary contributes its fractional part.
/// `tail = 1` gives the mean; `tail = 0` is rejected because the limit is
/// the maximum, which callers should take directly.
pub fn cvar(losses: &[f64], weights: &[f64], tail: f64) -> Result<f64> {
    check_weights(losses, weights)?;
    if !(tail > 0.0 && tail <= 1.0) {
        return Err(Error::invalid(format!("CVaR tail mass must lie in (0, 1], got {tail}")));
    }
    if tail == 1.0 {
        return Ok(mean(losses, weights));
    }
    let mut order: Vec<usize> = (0..losses.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]));
    let mut remaining = tail;
    let mut acc = 0.0;
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in order {
        let w = weights[i].min(remaining);
        acc += w * losses[i];
        hi = hi.max(losses[i]);
        lo = lo.min(losses[i]);
        remaining -= w;
        if remaining <= 0.0 {
            break;
        }
    }
    // an average of the included atoms; clamping only removes rounding
    Ok((acc / tail).clamp(lo, hi))
}

/// Cvar for a uniform sample.
pub fn cvar_uniform(losses: &[f64], tail: f64) -> Result<f64> {
    let w = vec![1.0 / losses.len().max(1) as f64; losses.len()];
    cvar(losses, &w, tail)
}

fn mean(losses: &[f64], weights: &[f64]) -> f64 {
    losses.iter().zip(weights).map(|(l, w)| l * w).sum()
}

fn max_positive(losses: &[f64], weights: &[f64]) -> f64 {
    losses
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Reverse LV worst-case risk: the supremum of `E_Q[f]` over all `Q` with
/// `P = (1 − ε)Q + εR`, which is the CVaR at tail mass `1 − ε`.
///
/// `ε = 0` gives the mean and `ε = 1` the largest loss carrying weight.
pub fn reverse_lv_risk(losses: &[f64], weights: &[f64], eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if eps == 1.0 {
        check_weights(losses, weights)?;
        return Ok(max_positive(losses, weights));
    }
    cvar(losses, weights, 1.0 - eps)
}

/// TV worst-case risk `(1 − ε)·CVaR at tail 1 − ε + ε·sup`.
pub fn tv_risk(losses: &[f64], weights: &[f64], eps: f64, sup_value: f64) -> Result<f64> {
    check_eps(eps)?;
    check_weights(losses, weights)?;
    let max = max_positive(losses, weights);
    if sup_value < max - TOL.membership * (1.0 + max.abs()) {
        return Err(Error::invalid(format!(
            "sup value {sup_value} is below the largest loss {max}"
        )));
    }
    if eps == 1.0 {
        return Ok(sup_value);
    }
    Ok((1.0 - eps) * cvar(losses, weights, 1.0 - eps)? + eps * sup_value)
}

/// Worst-case law in the TV ball around a finite distribution over loss
/// values: mass `min(ε, 1)` is removed from the lowest-loss atoms and placed
/// on the largest atom (smallest index on ties).
pub fn tv_worst_case_discrete(p: &DiscreteDistribution<f64>, eps: f64) -> DiscreteDistribution<f64> {
    let atoms = p.atoms().to_vec();
    let mut probs = p.probs().to_vec();
    let top = argmax(&atoms);
    let budget = eps.clamp(0.0, 1.0);
    if budget >= 1.0 {
        probs.iter_mut().for_each(|q| *q = 0.0);
        probs[top] = 1.0;
        return DiscreteDistribution::new(atoms, probs).expect("valid dirac");
    }
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| atoms[a].total_cmp(&atoms[b]).then(a.cmp(&b)));
    let mut remaining = budget;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let take = probs[i].min(remaining);
        probs[i] -= take;
        remaining -= take;
    }
    probs[top] += budget - remaining;
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|q| *q /= s);
    DiscreteDistribution::new(atoms, probs).expect("mass is conserved")
}

/// `E_Q[f]` for the greedy TV worst case; atoms are the loss values.
pub fn tv_risk_oracle_discrete(p: &DiscreteDistribution<f64>, eps: f64) -> f64 {
    tv_worst_case_discrete(p, eps).mean()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `(1 − ε)·centre + ε·δ_{ξ*}` with `ξ*` the largest-loss atom.
pub fn worst_case_distribution_lv<A: Clone>(
    centre: &DiscreteDistribution<A>,
    losses: &[f64],
    eps: f64,
) -> Result<DiscreteDistribution<A>> {
    check_eps(eps)?;
    check_dim(centre.len(), losses.len())?;
    let top = argmax(losses);
    let mut probs: Vec<f64> = centre.probs().iter().map(|p| (1.0 - eps) * p).collect();
    probs[top] += eps;
    DiscreteDistribution::new(centre.atoms().to_vec(), probs)
}

/// `ε_c + ε*·ρ − ε*·ε_c·ρ`, clamped to `[0, 1]`.
pub fn effective_tolerance(eps_c: f64, eps_star: f64, rho: f64) -> f64 {
    (eps_c + eps_star * rho - eps_star * eps_c * rho).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub eps_c: f64,
    pub eps_star: f64,
    /// Deployment-contamination in-bulk mass ratio `R̃(Ξ₀)/P̃(Ξ₀)`.
    pub rho: f64,
    pub gamma: f64,
    /// `R̃(Ξ₀)`
    pub r_tilde_bulk_mass: f64,
    pub p: f64,
    pub m_p: f64,
    pub in_bulk_mean: f64,
    pub in_bulk_sup: f64,
}

impl CertificateInputs {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64, hi_open: bool| {
            let ok = v >= 0.0 && if hi_open { v < 1.0 } else { v <= 1.0 };
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} is out of range")))
            }
        };
        unit("eps_c", self.eps_c, true)?;
        unit("eps_star", self.eps_star, true)?;
        unit("gamma", self.gamma, true)?;
        unit("r_tilde_bulk_mass", self.r_tilde_bulk_mass, false)?;
        if !(self.rho >= 0.0) {
            return Err(Error::invalid("rho must be nonnegative"));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::invalid("moment order p must be finite and > 1"));
        }
        if !(self.m_p >= 0.0) {
            return Err(Error::invalid("moment bound M_p must be nonnegative"));
        }
        Ok(())
    }

    pub fn effective_tolerance(&self) -> f64 {
        effective_tolerance(self.eps_c, self.eps_star, self.rho)
    }
}

/// In-bulk LV risk at the effective tolerance plus the Hölder tail term
/// `M_p·((1 − ε*)γ + ε*(1 − R̃(Ξ₀)))^{1/q}` with `q = p/(p − 1)`.
pub fn certificate_bound(c: &CertificateInputs) -> Result<f64> {
    c.validate()?;
    let eps_eff = c.effective_tolerance();
    let q = c.p / (c.p - 1.0);
    let tail_mass = (1.0 - c.eps_star) * c.gamma + c.eps_star * (1.0 - c.r_tilde_bulk_mass);
    Ok(lv_risk(eps_eff, c.in_bulk_mean, c.in_bulk_sup)? + c.m_p * tail_mass.max(0.0).powf(1.0 / q))
}

/// Draws a point of the bulk set. With `boundary` the point lies on the
/// relative boundary (where suprema of affine forms are attained); otherwise
/// it is uniform over the set.
pub fn sample_bulk_point(bulk: &BulkSet, rng: &mut Rng, boundary: bool) -> Vec<f64> {
    match bulk {
        BulkSet::Ellipsoid {
            center,
            factor,
            radius,
        } => {
            let d = center.len();
            let mut z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = crate::linalg::norm2(&z).max(f64::MIN_POSITIVE);
            let scale = if boundary {
                1.0
            } else {
                rng.random::<f64>().powf(1.0 / d as f64)
            };
            z.iter_mut().for_each(|v| *v *= scale / n);
            let lz = crate::linalg::l_mul(factor, &z);
            // pull back inside if rounding pushed it out
            let mut shrink = 1.0;
            loop {
                let p: Vec<f64> = center.iter().zip(&lz).map(|(m, s)| m + radius * shrink * s).collect();
                if bulk.contains(&p) || shrink < 0.5 {
                    return p;
                }
                shrink *= 1.0 - 1e-12;
            }
        }
        BulkSet::Box {
            center,
            halfwidths,
            radius,
        } => center
            .iter()
            .zip(halfwidths)
            .map(|(m, w)| {
                let u: f64 = if boundary {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    2.0 * rng.random::<f64>() - 1.0
                };
                m + radius * w * u
            })
            .collect(),
        BulkSet::Product { blocks } => {
            let mut out = vec![0.0; bulk.dim()];
            for b in blocks {
                for (k, v) in sample_bulk_point(&b.set, rng, boundary).into_iter().enumerate() {
                    out[b.indices[k]] = v;
                }
            }
            out
        }
    }
}

/// Input of the `risk` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiskInstance {
    pub loss: PiecewiseAffineLoss,
    pub bulk: BulkSet,
    /// In-bulk centre samples.
    pub samples: OutcomeMatrix,
    /// Uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub eps: f64,
    pub lv_risk: f64,
    pub tv_risk: f64,
    pub reverse_lv_risk: f64,
}

pub fn evaluate_risks(inst: &RiskInstance) -> Result<Vec<RiskRow>> {
    inst.bulk.validate()?;
    check_dim(inst.loss.dim(), inst.samples.n_cols())?;
    let n = inst.samples.n_rows();
    let weights = inst.weights.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let losses: Vec<f64> = inst.samples.rows().map(|r| inst.loss.eval(r)).collect();
    check_weights(&losses, &weights)?;
    if let Some(i) = inst.samples.rows().position(|r| !inst.bulk.contains(r)) {
        return Err(Error::invalid(format!("sample row {i} lies outside the bulk set")));
    }
    let (sup, _) = sup_over_bulk(&inst.loss, &inst.bulk)?;
    let m = mean(&losses, &weights);
    inst.eps
        .iter()
        .map(|&eps| {
            Ok(RiskRow {
                eps,
                lv_risk: lv_risk(eps, m, sup)?,
                tv_risk: tv_risk(&losses, &weights, eps, sup)?,
                reverse_lv_risk: reverse_lv_risk(&losses, &weights, eps)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context("evaluating risks"))
}

pub mod oracle {
    //! Randomized cross-checks of the closed forms against brute force.

    use rand::Rng as _;
    use serde::Serialize;

    use super::*;
    use crate::calibrate::{lv_distortion_bruteforce, lv_distortion_discrete};
    use crate::model::AffinePiece;
    use crate::rng;

    #[derive(Clone, Debug, Serialize)]
    pub struct OracleCheck {
        pub name: &'static str,
        pub instances: usize,
        pub max_error: f64,
        pub tolerance: f64,
        pub passed: bool,
    }

    #[derive(Clone, Debug, Serialize)]
    pub struct OracleReport {
        pub seed: u64,
        pub checks: Vec<OracleCheck>,
    }

    impl OracleReport {
        pub fn passed(&self) -> bool {
            self.checks.iter().all(|c| c.passed)
        }
    }

    pub fn random_probs(rng: &mut Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                // some exact zeros so the support-handling paths are exercised
                if rng.random::<f64>() < 0.1 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let s: f64 = raw.iter().sum();
        if s == 0.0 {
            let mut p = vec![0.0; n];
            p[0] = 1.0;
            return p;
        }
        let mut p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let rest: f64 = p[1..].iter().sum();
        p[0] = (1.0 - rest).max(0.0);
        p
    }

    fn check(name: &'static str, errors: impl Iterator<Item = f64>, tolerance: f64) -> OracleCheck {
        let (mut n, mut worst) = (0, 0.0f64);
        for e in errors {
            n += 1;
            worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        }
        OracleCheck {
            name,
            instances: n,
            max_error: worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }

    pub fn run(seed: u64, instances: usize) -> OracleReport {
        let mut r = rng::stream(seed, 0);
        let tv = check(
            "tv_formula_vs_greedy",
            (0..instances).map(|_| {
                let n = r.random_range(1..=64);
                let atoms: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
                let probs = random_probs(&mut r, n);
                let eps = r.random::<f64>();
                let p = DiscreteDistribution::new(atoms.clone(), probs.clone()).unwrap();
                let sup = atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let a = tv_risk(&atoms, &probs, eps, sup).unwrap();
                (a - tv_risk_oracle_discrete(&p, eps)).abs()
            }),
            1e-12,
        );
        let mut r = rng::stream(seed, 1);
        let lv = check(
            "lv_worst_case_distribution",
            (0..instances).map(|_| {
                let n = r.random_range(1..=32);
                let losses: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
                let p = DiscreteDistribution::new((0..n).collect::<Vec<usize>>(), random_probs(&mut r, n)).unwrap();
                let eps = r.random::<f64>();
                let q = worst_case_distribution_lv(&p, &losses, eps).unwrap();
                let eq = q.expect(|&i| losses[i]);
                let mean = p.expect(|&i| losses[i]);
                let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (eq - lv_risk(eps, mean, max).unwrap()).abs()
            }),
            1e-12,
        );
        let mut r = rng::stream(seed, 2);
        let dist = check(
            "lv_distortion_formula_vs_events",
            (0..instances).map(|_| {
                let n = r.random_range(1..=12);
                let p = DiscreteDistribution::new((0..n).collect::<Vec<usize>>(), random_probs(&mut r, n)).unwrap();
                let q = DiscreteDistribution::new((0..n).collect::<Vec<usize>>(), random_probs(&mut r, n)).unwrap();
                (lv_distortion_discrete(&q, &p) - lv_distortion_bruteforce(&q, &p).unwrap()).abs()
            }),
            1e-12,
        );
        let mut r = rng::stream(seed, 3);
        let mix = check(
            "mixture_inside_lv_ball",
            (0..instances).map(|_| {
                let n = r.random_range(1..=12);
                let p = DiscreteDistribution::new((0..n).collect::<Vec<usize>>(), random_probs(&mut r, n)).unwrap();
                let q = DiscreteDistribution::new((0..n).collect::<Vec<usize>>(), random_probs(&mut r, n)).unwrap();
                let eps = r.random::<f64>();
                let m = p.mixture(&q, eps).unwrap();
                (lv_distortion_bruteforce(&m, &p).unwrap() - eps).max(0.0)
            }),
            1e-12,
        );
        let mut r = rng::stream(seed, 4);
        let order = check(
            "forward_reverse_inside_tv",
            (0..instances).map(|_| {
                let n = r.random_range(1..=64);
                let atoms: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
                let probs = random_probs(&mut r, n);
                let eps = r.random_range(1e-6..1.0 - 1e-6);
                let max = atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mean: f64 = atoms.iter().zip(&probs).map(|(a, p)| a * p).sum();
                let tv = tv_risk(&atoms, &probs, eps, max).unwrap();
                let rev = reverse_lv_risk(&atoms, &probs, eps).unwrap();
                let fwd = lv_risk(eps, mean, max).unwrap();
                (rev - tv).max(fwd - tv).max(0.0)
            }),
            1e-12,
        );
        let mut r = rng::stream(seed, 5);
        let sup = check(
            "closed_form_sup_dominates_samples",
            (0..instances).map(|_| {
                let d = r.random_range(1..=3);
                let bulk = random_bulk(&mut r, d);
                let pieces = r.random_range(1..=4);
                let loss = random_loss(&mut r, d, pieces);
                let (v, _) = sup_over_bulk(&loss, &bulk).unwrap();
                (0..200)
                    .map(|k| loss.eval(&sample_bulk_point(&bulk, &mut r, k % 2 == 0)) - v)
                    .fold(0.0f64, f64::max)
                    / (1.0 + v.abs())
            }),
            1e-12,
        );
        OracleReport {
            seed,
            checks: vec![tv, lv, dist, mix, order, sup],
        }
    }

    pub fn random_loss(rng: &mut Rng, d: usize, pieces: usize) -> PiecewiseAffineLoss {
        PiecewiseAffineLoss::new(
            (0..pieces)
                .map(|_| AffinePiece {
                    slope: (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
                    offset: rng.random_range(-2.0..2.0),
                })
                .collect(),
        )
        .unwrap()
    }

    pub fn random_ellipsoid(rng: &mut Rng, d: usize) -> BulkSet {
        let factor = nalgebra::DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                rng.random_range(0.3..2.0)
            } else if i > j {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let center = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        BulkSet::ellipsoid(center, factor, rng.random_range(0.1..3.0)).unwrap()
    }

    pub fn random_box(rng: &mut Rng, d: usize) -> BulkSet {
        let center = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
        BulkSet::boxed(center, w, rng.random_range(0.1..3.0)).unwrap()
    }

    /// Ellipsoid, box or a two-block product, chosen at random.
    pub fn random_bulk(rng: &mut Rng, d: usize) -> BulkSet {
        match rng.random_range(0..3) {
            0 => random_ellipsoid(rng, d),
            1 => random_box(rng, d),
            _ => random_product(rng, d),
        }
    }

    pub fn random_product(rng: &mut Rng, d: usize) -> BulkSet {
        use crate::model::BulkBlock;
        if d == 1 {
            return BulkSet::product(vec![BulkBlock {
                indices: vec![0],
                set: random_ellipsoid(rng, 1),
            }])
            .unwrap();
        }
        let mut idx: Vec<usize> = (0..d).collect();
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
        let cut = rng.random_range(1..d);
        let first = idx[..cut].to_vec();
        let second = idx[cut..].to_vec();
        BulkSet::product(vec![
            BulkBlock {
                set: random_ellipsoid(rng, first.len()),
                indices: first,
            },
            BulkBlock {
                set: random_box(rng, second.len()),
                indices: second,
            },
        ])
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffinePiece, BulkBlock, DecisionLoss};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    fn single(slope: Vec<f64>, offset: f64) -> PiecewiseAffineLoss {
        PiecewiseAffineLoss::new(vec![AffinePiece { slope, offset }]).unwrap()
    }

    #[test]
    fn sup_linear_over_ball() {
        let bulk = BulkSet::ellipsoid(vec![0.0, 0.0], DMatrix::identity(2, 2), 2.0).unwrap();
        let (v, j) = sup_over_bulk(&single(vec![3.0, 4.0], 1.0), &bulk).unwrap();
        assert_eq!(v, 11.0);
        assert_eq!(j, 0);
    }

    #[test]
    fn sup_absolute_value_row() {
        let bulk = BulkSet::ellipsoid(vec![1.0, 0.0], DMatrix::identity(2, 2), 1.0).unwrap();
        let abs = PiecewiseAffineLoss::new(vec![
            AffinePiece { slope: vec![1.0, 0.0], offset: -4.0 },
            AffinePiece { slope: vec![-1.0, 0.0], offset: 4.0 },
        ])
        .unwrap();
        let (v, j) = sup_over_bulk(&abs, &bulk).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
        assert_eq!(j, 1);
    }

    #[test]
    fn sup_constant_piece() {
        let bulk = BulkSet::boxed(vec![5.0, -1.0], vec![1.0, 3.0], 10.0).unwrap();
        assert_eq!(sup_over_bulk(&single(vec![0.0, 0.0], 2.5), &bulk).unwrap().0, 2.5);
    }

    #[test]
    fn sup_lad_over_product() {
        let bulk = BulkSet::product(vec![
            BulkBlock {
                indices: vec![0, 1],
                set: BulkSet::ellipsoid(vec![0.0, 0.0], DMatrix::identity(2, 2), 1.0).unwrap(),
            },
            BulkBlock {
                indices: vec![2],
                set: BulkSet::boxed(vec![0.0], vec![1.0], 2.0).unwrap(),
            },
        ])
        .unwrap();
        let loss = DecisionLoss::lad(2).unwrap().induced(&[1.0, 0.0, 0.0]).unwrap();
        let (v, _) = sup_over_bulk(&loss, &bulk).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sup_dimension_mismatch() {
        let bulk = BulkSet::boxed(vec![0.0], vec![1.0], 1.0).unwrap();
        assert!(sup_over_bulk(&single(vec![1.0, 1.0], 0.0), &bulk).is_err());
    }

    #[test]
    fn lv_risk_examples() {
        assert_eq!(lv_risk(0.0, 2.0, 10.0).unwrap(), 2.0);
        assert_eq!(lv_risk(1.0, 2.0, 10.0).unwrap(), 10.0);
        assert_eq!(lv_risk(0.25, 2.0, 10.0).unwrap(), 4.0);
        assert!(lv_risk(1.5, 2.0, 10.0).is_err());
    }

    #[test]
    fn cvar_tail_examples() {
        assert_eq!(cvar(&[1.0, 2.0, 3.0, 4.0], &uniform(4), 0.5).unwrap(), 3.5);
        assert_eq!(cvar(&[0.0, 1.0, 2.0, 3.0], &uniform(4), 0.25).unwrap(), 3.0);
        assert_eq!(cvar(&[7.0; 5], &uniform(5), 0.3).unwrap(), 7.0);
        assert_eq!(cvar(&[1.0, 2.0, 3.0, 4.0], &uniform(4), 1.0).unwrap(), 2.5);
        assert!(cvar(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn cvar_fractional_boundary_atom() {
        // worst 0.3 of uniform {0,1,2,3}: 0.25 at 3 and 0.05 at 2
        let v = cvar(&[0.0, 1.0, 2.0, 3.0], &uniform(4), 0.3).unwrap();
        assert!((v - (0.25 * 3.0 + 0.05 * 2.0) / 0.3).abs() < 1e-15);
    }

    #[test]
    fn reverse_lv_endpoints() {
        let l = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(reverse_lv_risk(&l, &uniform(4), 0.0).unwrap(), 1.5);
        assert_eq!(reverse_lv_risk(&l, &uniform(4), 1.0).unwrap(), 3.0);
        assert_eq!(reverse_lv_risk(&l, &uniform(4), 0.5).unwrap(), 2.5);
        assert_eq!(reverse_lv_risk(&l, &uniform(4), 0.75).unwrap(), 3.0);
    }

    #[test]
    fn tv_examples() {
        let l = [0.0, 1.0, 2.0, 3.0];
        let p = DiscreteDistribution::new(l.to_vec(), uniform(4)).unwrap();
        assert_eq!(tv_risk(&l, &uniform(4), 0.5, 3.0).unwrap(), 2.75);
        assert_eq!(tv_risk_oracle_discrete(&p, 0.5), 2.75);
        let q = tv_worst_case_discrete(&p, 0.5);
        assert_eq!(q.probs(), &[0.0, 0.0, 0.25, 0.75]);
        assert_eq!(tv_risk(&l, &uniform(4), 0.0, 3.0).unwrap(), 1.5);
        assert_eq!(tv_risk(&l, &uniform(4), 1.0, 3.0).unwrap(), 3.0);
        assert_eq!(tv_risk_oracle_discrete(&p, 0.0), 1.5);
        assert_eq!(tv_worst_case_discrete(&p, 2.0).probs(), &[0.0, 0.0, 0.0, 1.0]);
        assert!(tv_risk(&l, &uniform(4), 0.5, 2.0).is_err());
    }

    #[test]
    fn cor1_examples() {
        let c = DiscreteDistribution::uniform(vec!["a", "b"]).unwrap();
        let q = worst_case_distribution_lv(&c, &[1.0, 5.0], 0.5).unwrap();
        assert_eq!(q.probs(), &[0.25, 0.75]);
        assert_eq!(q.expect(|a| if *a == "a" { 1.0 } else { 5.0 }), 4.0);
        assert_eq!(worst_case_distribution_lv(&c, &[1.0, 5.0], 0.0).unwrap(), c);
        assert_eq!(worst_case_distribution_lv(&c, &[1.0, 5.0], 1.0).unwrap().probs(), &[0.0, 1.0]);
        // ties go to the first atom
        assert_eq!(worst_case_distribution_lv(&c, &[5.0, 5.0], 1.0).unwrap().probs(), &[1.0, 0.0]);
    }

    #[test]
    fn effective_tolerance_examples() {
        assert_eq!(effective_tolerance(0.0, 0.3, 0.0), 0.0);
        assert!((effective_tolerance(0.1, 0.2, 0.5) - 0.19).abs() < 1e-15);
        assert_eq!(effective_tolerance(0.0, 0.3, 1.0), 0.3);
    }

    fn inputs() -> CertificateInputs {
        CertificateInputs {
            eps_c: 0.0,
            eps_star: 0.1,
            rho: 1.0,
            gamma: 0.05,
            r_tilde_bulk_mass: 1.0,
            p: 2.0,
            m_p: 20.0,
            in_bulk_mean: 2.0,
            in_bulk_sup: 10.0,
        }
    }

    #[test]
    fn certificate_examples() {
        assert!((certificate_bound(&inputs()).unwrap() - 7.0426).abs() < 1e-3);
        let plain = CertificateInputs {
            eps_c: 0.2,
            eps_star: 0.0,
            gamma: 0.0,
            ..inputs()
        };
        assert!((certificate_bound(&plain).unwrap() - lv_risk(0.2, 2.0, 10.0).unwrap()).abs() < 1e-15);
        assert!(certificate_bound(&CertificateInputs { p: 1.0, ..inputs() }).is_err());
    }

    #[test]
    fn oracle_report_passes() {
        let report = oracle::run(3, 200);
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn risk_rows_from_instance() {
        let inst = RiskInstance {
            loss: single(vec![1.0], 0.0),
            bulk: BulkSet::boxed(vec![1.5], vec![1.5], 1.0).unwrap(),
            samples: OutcomeMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap(),
            weights: None,
            eps: vec![0.0, 0.5, 1.0],
        };
        let rows = evaluate_risks(&inst).unwrap();
        assert_eq!(rows[1].tv_risk, 2.75);
        assert_eq!(rows[1].lv_risk, 2.25);
        assert_eq!(rows[2].reverse_lv_risk, 3.0);
    }

    proptest! {
        #[test]
        fn lv_risk_affine_nondecreasing(mean in -5.0f64..5.0, gap in 0.0f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let sup = mean + gap;
            prop_assert!(lv_risk(lo, mean, sup).unwrap() <= lv_risk(hi, mean, sup).unwrap() + 1e-12);
            let mid = lv_risk(0.5 * (lo + hi), mean, sup).unwrap();
            let avg = 0.5 * (lv_risk(lo, mean, sup).unwrap() + lv_risk(hi, mean, sup).unwrap());
            prop_assert!((mid - avg).abs() < 1e-12);
        }

        #[test]
        fn support_point_attains_support_value(seed in 0u64..500) {
            let mut r = crate::rng::stream(seed, 9);
            let d = 1 + (seed % 3) as usize;
            let bulk = oracle::random_bulk(&mut r, d);
            let a: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            let x = bulk.support_point(&a);
            let v = bulk.support_value(&a);
            prop_assert!((crate::linalg::dot(&a, &x) - v).abs() <= 1e-10 * (1.0 + v.abs()));
        }
    }
}
