//! Objective builders: SAA, LV, CVaR, KL (empirical and Bayesian),
//! Wasserstein-LAD and ridge.

use nalgebra::{DMatrix, DVector};

use super::kl::kl_dual;
use super::{Domain, ObjectiveOracle};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm2};
use crate::model::{BulkSet, DecisionLoss, OutcomeMatrix};

fn loss_domain(loss: &DecisionLoss) -> Domain {
    match loss {
        DecisionLoss::Newsvendor { dim, .. } => Domain::NonnegativePrefix(*dim),
        DecisionLoss::LadRegression { .. } => Domain::Free,
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Data-scaled search box for a decision loss: `[0, 3·max demand]` per
/// coordinate for the newsvendor; for regression `|w_k| ≤ 10·sd(y)/min sd(x)`
/// and an intercept range that covers every such slope.
fn loss_box(loss: &DecisionLoss, data: &OutcomeMatrix, bulk: Option<&BulkSet>) -> Vec<(f64, f64)> {
    match *loss {
        DecisionLoss::Newsvendor { dim, .. } => {
            let mut top = data.values().iter().copied().fold(0.0f64, f64::max);
            if let Some(b) = bulk {
                for i in 0..dim {
                    let mut e = vec![0.0; dim];
                    e[i] = 1.0;
                    top = top.max(b.support_value(&e));
                }
            }
            vec![(0.0, 3.0 * top.max(1.0)); dim]
        }
        DecisionLoss::LadRegression { features } => {
            let (my, sy) = mean_sd(&data.column(features));
            let stats: Vec<(f64, f64)> = (0..features).map(|k| mean_sd(&data.column(k))).collect();
            let min_sd = stats.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            let sy = if sy > 0.0 { sy } else { 1.0 };
            let min_sd = if min_sd > 0.0 { min_sd } else { 1.0 };
            let bw = 10.0 * sy / min_sd;
            let bb = my.abs() + bw * stats.iter().map(|s| s.0.abs()).sum::<f64>() + 10.0 * sy;
            let mut b = vec![(-bw, bw); features];
            b.push((-bb, bb));
            b
        }
    }
}

fn loss_start(loss: &DecisionLoss, data: &OutcomeMatrix) -> Vec<f64> {
    match *loss {
        DecisionLoss::Newsvendor { dim, .. } => (0..dim)
            .map(|j| {
                let c = data.column(j);
                (c.iter().sum::<f64>() / c.len().max(1) as f64).max(0.0)
            })
            .collect(),
        DecisionLoss::LadRegression { features } => {
            let mut x = vec![0.0; features + 1];
            let mut y = data.column(features);
            if !y.is_empty() {
                y.sort_by(f64::total_cmp);
                x[features] = y[y.len() / 2];
            }
            x
        }
    }
}

fn check_samples(loss: &DecisionLoss, samples: &OutcomeMatrix) -> Result<()> {
    check_dim(loss.outcome_dim(), samples.n_cols())
}

/// Sample-average (ERM) objective `(1/n) Σ ℓ(x; ξ_i)`.
#[derive(Clone, Debug)]
pub struct SaaObjective {
    loss: DecisionLoss,
    samples: OutcomeMatrix,
}

impl SaaObjective {
    pub fn loss(&self) -> &DecisionLoss {
        &self.loss
    }

    pub fn samples(&self) -> &OutcomeMatrix {
        &self.samples
    }

    /// Mean loss; adds `weight ×` the mean subgradient to `grad`.
    fn mean_into(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
        let n = self.samples.n_rows() as f64;
        let mut total = 0.0;
        for xi in self.samples.rows() {
            total += self.loss.loss(x, xi);
            self.loss.add_subgradient(x, xi, weight / n, grad);
        }
        total / n
    }
}

pub fn build_saa_objective(loss: DecisionLoss, samples: OutcomeMatrix) -> Result<SaaObjective> {
    check_samples(&loss, &samples)?;
    if samples.n_rows() == 0 {
        return Err(Error::invalid("SAA objective needs at least one sample"));
    }
    Ok(SaaObjective { loss, samples })
}

impl ObjectiveOracle for SaaObjective {
    fn dim(&self) -> usize {
        self.loss.decision_dim()
    }

    fn domain(&self) -> Domain {
        loss_domain(&self.loss)
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.mean_into(x, 1.0, grad)
    }

    fn initial_point(&self) -> Vec<f64> {
        loss_start(&self.loss, &self.samples)
    }

    fn box_hint(&self) -> Option<Vec<(f64, f64)>> {
        Some(loss_box(&self.loss, &self.samples, None))
    }
}

/// Forward-LV objective `(1 − ε)·(1/n) Σ ℓ(x; ξ_i) + ε·sup_{ξ ∈ S} ℓ(x; ξ)`.
#[derive(Clone, Debug)]
pub struct LvObjective {
    loss: DecisionLoss,
    samples: OutcomeMatrix,
    bulk: BulkSet,
    eps: f64,
}

/// In-bulk supremum of the loss at `x`: value, attaining piece (smallest
/// index on ties) and maximizing outcome.
pub fn loss_sup(loss: &DecisionLoss, bulk: &BulkSet, x: &[f64]) -> (f64, usize, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut slope = Vec::new();
    for j in 0..loss.piece_count() {
        let p = loss.piece(x, j);
        let v = p.offset + bulk.support_value(&p.slope);
        if v > best.0 {
            best = (v, j);
            slope = p.slope;
        }
    }
    (best.0, best.1, bulk.support_point(&slope))
}

pub fn build_lv_objective(
    loss: DecisionLoss,
    in_bulk_samples: OutcomeMatrix,
    bulk: BulkSet,
    eps: f64,
) -> Result<LvObjective> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("tolerance must lie in [0, 1], got {eps}")));
    }
    bulk.validate()?;
    check_dim(loss.outcome_dim(), bulk.dim())?;
    check_samples(&loss, &in_bulk_samples)?;
    if in_bulk_samples.n_rows() == 0 && eps < 1.0 {
        return Err(Error::invalid("LV objective with eps < 1 needs in-bulk samples"));
    }
    Ok(LvObjective {
        loss,
        samples: in_bulk_samples,
        bulk,
        eps,
    })
}

impl LvObjective {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// In-bulk sample mean of the loss at `x`.
    pub fn mean(&self, x: &[f64]) -> f64 {
        let n = self.samples.n_rows();
        if n == 0 {
            return 0.0;
        }
        self.samples.rows().map(|xi| self.loss.loss(x, xi)).sum::<f64>() / n as f64
    }

    /// In-bulk supremum of the loss at `x`.
    pub fn sup(&self, x: &[f64]) -> f64 {
        loss_sup(&self.loss, &self.bulk, x).0
    }
}

impl ObjectiveOracle for LvObjective {
    fn dim(&self) -> usize {
        self.loss.decision_dim()
    }

    fn domain(&self) -> Domain {
        loss_domain(&self.loss)
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        let n = self.samples.n_rows();
        if self.eps < 1.0 && n > 0 {
            let w = (1.0 - self.eps) / n as f64;
            let mut total = 0.0;
            for xi in self.samples.rows() {
                total += self.loss.loss(x, xi);
                self.loss.add_subgradient(x, xi, w, grad);
            }
            value += (1.0 - self.eps) * total / n as f64;
        }
        if self.eps > 0.0 {
            let (s, j, xi_star) = loss_sup(&self.loss, &self.bulk, x);
            self.loss.add_piece_gradient(j, &xi_star, self.eps, grad);
            value += self.eps * s;
        }
        value
    }

    fn initial_point(&self) -> Vec<f64> {
        if self.samples.n_rows() > 0 {
            loss_start(&self.loss, &self.samples)
        } else {
            vec![0.0; self.dim()]
        }
    }

    fn box_hint(&self) -> Option<Vec<(f64, f64)>> {
        if self.samples.n_rows() > 0 {
            Some(loss_box(&self.loss, &self.samples, Some(&self.bulk)))
        } else {
            None
        }
    }
}

/// Rockafellar–Uryasev CVaR objective over `(x, τ)`:
/// `τ + (1/(εn)) Σ (ℓ(x; ξ_i) − τ)₊`, the mean of the worst ε-fraction.
#[derive(Clone, Debug)]
pub struct CvarObjective {
    loss: DecisionLoss,
    samples: OutcomeMatrix,
    eps: f64,
}

pub fn build_cvar_objective(loss: DecisionLoss, samples: OutcomeMatrix, eps: f64) -> Result<CvarObjective> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("CVaR tail mass must lie in (0, 1], got {eps}")));
    }
    check_samples(&loss, &samples)?;
    if samples.n_rows() == 0 {
        return Err(Error::invalid("CVaR objective needs at least one sample"));
    }
    Ok(CvarObjective { loss, samples, eps })
}

impl CvarObjective {
    /// Value of the objective at decision `x` with the optimal `τ`.
    pub fn value_at(&self, x: &[f64], tau: f64) -> f64 {
        let n = self.samples.n_rows() as f64;
        tau + self
            .samples
            .rows()
            .map(|xi| (self.loss.loss(x, xi) - tau).max(0.0))
            .sum::<f64>()
            / (self.eps * n)
    }
}

impl ObjectiveOracle for CvarObjective {
    fn dim(&self) -> usize {
        self.loss.decision_dim() + 1
    }

    fn domain(&self) -> Domain {
        loss_domain(&self.loss)
    }

    fn eval(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let p = self.loss.decision_dim();
        let (x, tau) = (&z[..p], z[p]);
        let scale = 1.0 / (self.eps * self.samples.n_rows() as f64);
        let mut total = 0.0;
        let mut count = 0usize;
        for xi in self.samples.rows() {
            let l = self.loss.loss(x, xi);
            if l > tau {
                total += l - tau;
                count += 1;
                self.loss.add_subgradient(x, xi, scale, &mut grad[..p]);
            }
        }
        grad[p] = 1.0 - count as f64 * scale;
        tau + scale * total
    }

    fn initial_point(&self) -> Vec<f64> {
        let mut x = loss_start(&self.loss, &self.samples);
        let mean = self.samples.rows().map(|xi| self.loss.loss(&x, xi)).sum::<f64>()
            / self.samples.n_rows() as f64;
        x.push(mean);
        x
    }

    fn box_hint(&self) -> Option<Vec<(f64, f64)>> {
        let x = loss_start(&self.loss, &self.samples);
        let mut b = loss_box(&self.loss, &self.samples, None);
        let losses: Vec<f64> = self.samples.rows().map(|xi| self.loss.loss(&x, xi)).collect();
        let hi = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let pad = hi - lo + 1.0;
        b.push((lo - pad, hi + pad));
        Some(b)
    }
}

/// KL-BDRO objective: the average over posterior draws of the KL dual of
/// each draw's scenario losses. A single draw gives the empirical (or
/// plug-in) KL-DRO objective.
#[derive(Clone, Debug)]
pub struct KlObjective {
    loss: DecisionLoss,
    draws: Vec<OutcomeMatrix>,
    eps: f64,
}

pub fn build_kl_bdro_objective(loss: DecisionLoss, draws: Vec<OutcomeMatrix>, eps: f64) -> Result<KlObjective> {
    if draws.is_empty() {
        return Err(Error::invalid("KL-BDRO needs at least one posterior draw"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("KL radius must be >= 0, got {eps}")));
    }
    for d in &draws {
        check_samples(&loss, d)?;
        if d.n_rows() == 0 {
            return Err(Error::invalid("every posterior draw needs at least one scenario"));
        }
    }
    Ok(KlObjective { loss, draws, eps })
}

/// Single-sample KL-DRO objective over the scenarios in `samples`.
pub fn build_kl_objective(loss: DecisionLoss, samples: OutcomeMatrix, eps: f64) -> Result<KlObjective> {
    build_kl_bdro_objective(loss, vec![samples], eps)
}

impl ObjectiveOracle for KlObjective {
    fn dim(&self) -> usize {
        self.loss.decision_dim()
    }

    fn domain(&self) -> Domain {
        loss_domain(&self.loss)
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let m = self.draws.len() as f64;
        let mut total = 0.0;
        let mut losses = Vec::new();
        for d in &self.draws {
            losses.clear();
            losses.extend(d.rows().map(|xi| self.loss.loss(x, xi)));
            let k = match kl_dual(&losses, self.eps) {
                Ok(k) => k,
                Err(_) => return f64::NAN,
            };
            total += k.value;
            for (xi, w) in d.rows().zip(&k.weights) {
                if *w > 0.0 {
                    self.loss.add_subgradient(x, xi, w / m, grad);
                }
            }
        }
        total / m
    }

    fn initial_point(&self) -> Vec<f64> {
        loss_start(&self.loss, &self.draws[0])
    }

    fn box_hint(&self) -> Option<Vec<(f64, f64)>> {
        let mut b = loss_box(&self.loss, &self.draws[0], None);
        for d in &self.draws[1..] {
            for (x, y) in b.iter_mut().zip(loss_box(&self.loss, d, None)) {
                x.0 = x.0.min(y.0);
                x.1 = x.1.max(y.1);
            }
        }
        Some(b)
    }
}

/// Wasserstein-regularized LAD over `(w, b₀)`:
/// `(1/n) Σ |y_i − wᵀx_i − b₀| + ρ‖(w, σ_Y)‖₂`, intercept unpenalized.
#[derive(Clone, Debug)]
pub struct WassersteinLad {
    lad: SaaObjective,
    rho: f64,
    sigma_y: f64,
}

/// `data` rows are `(x, y)` with the target in the last column.
pub fn build_wasserstein_lad_objective(data: OutcomeMatrix, rho: f64, sigma_y: f64) -> Result<WassersteinLad> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("rho must be >= 0, got {rho}")));
    }
    if !(sigma_y > 0.0 && sigma_y.is_finite()) {
        return Err(Error::invalid(format!("sigma_y must be > 0, got {sigma_y}")));
    }
    if data.n_cols() < 2 || data.n_rows() == 0 {
        return Err(Error::invalid("regression data needs rows and at least one feature"));
    }
    let lad = SaaObjective {
        loss: DecisionLoss::LadRegression {
            features: data.n_cols() - 1,
        },
        samples: data,
    };
    Ok(WassersteinLad { lad, rho, sigma_y })
}

impl ObjectiveOracle for WassersteinLad {
    fn dim(&self) -> usize {
        self.lad.dim()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut value = self.lad.eval(x, grad);
        let p = x.len() - 1;
        let norm = (dot(&x[..p], &x[..p]) + self.sigma_y * self.sigma_y).sqrt();
        value += self.rho * norm;
        for k in 0..p {
            grad[k] += self.rho * x[k] / norm;
        }
        value
    }

    fn initial_point(&self) -> Vec<f64> {
        self.lad.initial_point()
    }

    fn box_hint(&self) -> Option<Vec<(f64, f64)>> {
        self.lad.box_hint()
    }
}

/// Ridge regression `(1/n) Σ (y_i − wᵀx_i − b₀)² + λ‖w‖²` over `(w, b₀)`.
#[derive(Clone, Debug)]
pub struct RidgeObjective {
    data: OutcomeMatrix,
    lambda: f64,
}

pub fn build_ridge_objective(data: OutcomeMatrix, lambda: f64) -> Result<RidgeObjective> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("ridge penalty must be >= 0, got {lambda}")));
    }
    if data.n_cols() < 2 || data.n_rows() == 0 {
        return Err(Error::invalid("regression data needs rows and at least one feature"));
    }
    Ok(RidgeObjective { data, lambda })
}

impl RidgeObjective {
    fn centered(&self) -> (DMatrix<f64>, DVector<f64>, Vec<f64>, f64) {
        let n = self.data.n_rows();
        let p = self.data.n_cols() - 1;
        let means: Vec<f64> = (0..=p)
            .map(|k| self.data.column(k).iter().sum::<f64>() / n as f64)
            .collect();
        let xc = DMatrix::from_fn(n, p, |i, k| self.data.row(i)[k] - means[k]);
        let yc = DVector::from_fn(n, |i, _| self.data.row(i)[p] - means[p]);
        (xc, yc, means[..p].to_vec(), means[p])
    }

    fn assemble(&self, w: Vec<f64>, xbar: &[f64], ybar: f64) -> Vec<f64> {
        let b0 = ybar - dot(xbar, &w);
        let mut out = w;
        out.push(b0);
        out
    }

    /// Normal-equations solution on centered data.
    pub fn solve_closed_form(&self) -> Result<Vec<f64>> {
        let n = self.data.n_rows() as f64;
        let (xc, yc, xbar, ybar) = self.centered();
        let p = xbar.len();
        let a = xc.transpose() * &xc / n + DMatrix::identity(p, p) * self.lambda;
        let rhs = xc.transpose() * yc / n;
        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let eig = a.clone().symmetric_eigenvalues();
        let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig <= 1e-12 * scale {
            return Err(Error::invalid(format!(
                "ridge system is singular (smallest eigenvalue {min_eig:.3e}); use a positive penalty"
            )));
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::invalid("ridge system is not positive definite"))?;
        let w = chol.solve(&rhs);
        Ok(self.assemble(w.iter().copied().collect(), &xbar, ybar))
    }

    /// Conjugate-gradient minimization of the same objective, for
    /// cross-checking the closed form.
    pub fn solve_iterative(&self, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
        let n = self.data.n_rows() as f64;
        let (xc, yc, xbar, ybar) = self.centered();
        let p = xbar.len();
        let apply = |v: &DVector<f64>| -> DVector<f64> { xc.transpose() * (&xc * v) / n + v * self.lambda };
        let b = xc.transpose() * &yc / n;
        let mut w = DVector::zeros(p);
        let mut r = b.clone();
        let mut d = r.clone();
        let mut rr = r.dot(&r);
        let target = tol * tol * b.dot(&b).max(f64::MIN_POSITIVE);
        for _ in 0..max_iters {
            if rr <= target {
                break;
            }
            let ad = apply(&d);
            let curv = d.dot(&ad);
            if curv <= 0.0 {
                return Err(Error::invalid("ridge system is singular"));
            }
            let alpha = rr / curv;
            w += &d * alpha;
            r -= &ad * alpha;
            let rr_new = r.dot(&r);
            d = &r + &d * (rr_new / rr);
            rr = rr_new;
        }
        Ok(self.assemble(w.iter().copied().collect(), &xbar, ybar))
    }
}

impl ObjectiveOracle for RidgeObjective {
    fn dim(&self) -> usize {
        self.data.n_cols()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let p = x.len() - 1;
        let n = self.data.n_rows() as f64;
        let mut total = 0.0;
        for row in self.data.rows() {
            let r = row[p] - dot(&x[..p], &row[..p]) - x[p];
            total += r * r;
            for k in 0..p {
                grad[k] -= 2.0 * r * row[k] / n;
            }
            grad[p] -= 2.0 * r / n;
        }
        for k in 0..p {
            grad[k] += 2.0 * self.lambda * x[k];
        }
        total / n + self.lambda * dot(&x[..p], &x[..p])
    }

    fn initial_point(&self) -> Vec<f64> {
        let lad = SaaObjective {
            loss: DecisionLoss::LadRegression {
                features: self.data.n_cols() - 1,
            },
            samples: self.data.clone(),
        };
        lad.initial_point()
    }
}

/// Euclidean norm of the slope part of a regression decision `(w, b₀)`.
pub fn slope_norm(x: &[f64]) -> f64 {
    norm2(&x[..x.len() - 1])
}
