//! Centre distributions: empirical resampling, a Gaussian copula with
//! empirical marginals plus a linear-Gaussian response, and the posterior
//! predictive of a Student-t model fitted by Gibbs sampling.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, matrix_rows};
use crate::model::{BulkSet, OutcomeMatrix};
use crate::rng::{self, Rng};
use crate::tolerances::TOL;

/// Empirical CDF of one coordinate: distinct values in increasing order
/// and the CDF at each of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfTable {
    pub values: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl EcdfTable {
    pub fn fit(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::invalid("empirical CDF needs at least one value"));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let (mut values, mut cdf) = (Vec::new(), Vec::new());
        for (i, v) in sorted.iter().enumerate() {
            if values.last() == Some(v) {
                *cdf.last_mut().unwrap() = (i + 1) as f64 / n;
            } else {
                values.push(*v);
                cdf.push((i + 1) as f64 / n);
            }
        }
        Ok(Self { values, cdf })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.values.partition_point(|v| *v <= x) {
            0 => 0.0,
            k => self.cdf[k - 1],
        }
    }

    /// Left-continuous generalized inverse `inf{x : F(x) ≥ u}`.
    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|c| *c < u);
        self.values[k.min(self.values.len() - 1)]
    }

    fn validate(&self) -> Result<()> {
        let ok = !self.values.is_empty()
            && self.values.len() == self.cdf.len()
            && self.values.windows(2).all(|w| w[0] < w[1])
            && self.cdf.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("marginal table must be nonempty and strictly increasing"))
        }
    }
}

/// `Y = wᵀX + b₀ + σ_Y·N(0, 1)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionHead {
    pub w: Vec<f64>,
    pub b0: f64,
    pub sigma_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopulaCentre {
    pub marginals: Vec<EcdfTable>,
    /// Lower Cholesky factor of the latent covariance.
    #[serde(with = "matrix_rows")]
    pub latent_factor: DMatrix<f64>,
    pub jitter: f64,
    pub head: RegressionHead,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiwPrior {
    pub mu0: Vec<f64>,
    pub kappa0: f64,
    pub nu0: f64,
    #[serde(with = "matrix_rows")]
    pub psi0: DMatrix<f64>,
}

impl NiwPrior {
    /// Weak data-centred prior: `μ₀` the sample mean, `κ₀ = 1`,
    /// `ν₀ = d + 2`, `Ψ₀` the sample covariance.
    pub fn weak(data: &OutcomeMatrix) -> Self {
        let d = data.n_cols();
        let (mu0, psi0) = linalg::sample_covariance(data.values(), d);
        Self {
            mu0,
            kappa0: 1.0,
            nu0: d as f64 + 2.0,
            psi0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsState {
    pub mu: Vec<f64>,
    /// Lower Cholesky factor of the scale matrix `Σ`.
    #[serde(with = "matrix_rows")]
    pub factor: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentTPredictive {
    pub nu: f64,
    pub prior: NiwPrior,
    pub burn_in: usize,
    pub ridge: f64,
    /// Retained post-burn-in states in chain order.
    pub states: Vec<GibbsState>,
}

impl StudentTPredictive {
    pub fn posterior_mean_mu(&self) -> Vec<f64> {
        let d = self.prior.mu0.len();
        let mut m = vec![0.0; d];
        for s in &self.states {
            for (a, b) in m.iter_mut().zip(&s.mu) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.states.len().max(1) as f64);
        m
    }

    /// `k` predictive draws `ξ ~ t_ν(μ, Σ)` from the single retained state
    /// `state`, i.e. scenarios conditional on one posterior draw.
    pub fn sample_state(&self, state: usize, k: usize, seed: u64) -> Result<OutcomeMatrix> {
        let st = self
            .states
            .get(state)
            .ok_or_else(|| Error::invalid(format!("state {state} out of range ({} retained)", self.states.len())))?;
        if k == 0 {
            return Err(Error::invalid("sample count must be >= 1"));
        }
        let single = CentreSampler::StudentTPredictive(StudentTPredictive {
            states: vec![st.clone()],
            ..self.clone_without_states()
        });
        sample_centre(&single, k, seed)
    }

    fn clone_without_states(&self) -> Self {
        Self {
            nu: self.nu,
            prior: self.prior.clone(),
            burn_in: self.burn_in,
            ridge: self.ridge,
            states: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CentreSampler {
    Empirical { data: OutcomeMatrix },
    GaussianCopula(CopulaCentre),
    StudentTPredictive(StudentTPredictive),
}

pub const DEFAULT_BURN_IN: usize = 200;

impl CentreSampler {
    pub fn dim(&self) -> usize {
        match self {
            CentreSampler::Empirical { data } => data.n_cols(),
            CentreSampler::GaussianCopula(c) => c.marginals.len() + 1,
            CentreSampler::StudentTPredictive(s) => s.prior.mu0.len(),
        }
    }

    /// Structural checks; a sampler read from JSON should pass them before
    /// it is used.
    pub fn validate(&self) -> Result<()> {
        match self {
            CentreSampler::Empirical { .. } => Ok(()),
            CentreSampler::GaussianCopula(c) => {
                if c.marginals.is_empty() {
                    return Err(Error::invalid("copula centre has no fitted marginals"));
                }
                for m in &c.marginals {
                    m.validate()?;
                }
                let d = c.marginals.len();
                if c.latent_factor.nrows() != d || c.latent_factor.ncols() != d {
                    return Err(Error::invalid("latent factor does not match the marginals"));
                }
                check_dim(d, c.head.w.len())
            }
            CentreSampler::StudentTPredictive(s) => {
                if s.states.is_empty() {
                    return Err(Error::invalid("student-t sampler has no retained Gibbs states"));
                }
                let d = s.prior.mu0.len();
                for st in &s.states {
                    check_dim(d, st.mu.len())?;
                    check_dim(d, st.factor.nrows())?;
                }
                Ok(())
            }
        }
    }

    /// Appends `count` draws to `out`. `start` is the index of the first
    /// draw, so a sequence drawn in chunks equals one drawn at once.
    fn draw_into(&self, rng: &mut Rng, start: usize, count: usize, out: &mut Vec<f64>) {
        match self {
            CentreSampler::Empirical { data } => {
                for _ in 0..count {
                    let i = rng.random_range(0..data.n_rows());
                    out.extend_from_slice(data.row(i));
                }
            }
            CentreSampler::GaussianCopula(c) => {
                let d = c.marginals.len();
                let std = Normal::standard();
                let mut z = vec![0.0; d];
                for _ in 0..count {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let latent = linalg::l_mul(&c.latent_factor, &z);
                    let mut y = c.head.b0;
                    for (j, lz) in latent.iter().enumerate() {
                        let x = c.marginals[j].quantile(std.cdf(*lz));
                        y += c.head.w[j] * x;
                        out.push(x);
                    }
                    let e: f64 = rng.sample(StandardNormal);
                    out.push(y + c.head.sigma_y * e);
                }
            }
            CentreSampler::StudentTPredictive(s) => {
                let d = s.prior.mu0.len();
                let chi = ChiSquared::new(s.nu).expect("nu validated at fit time");
                let mut z = vec![0.0; d];
                for k in start..start + count {
                    // one predictive draw per retained state, cycling when
                    // more draws than states are requested
                    let st = &s.states[k % s.states.len()];
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let scale = (s.nu / chi.sample(rng)).sqrt();
                    let lz = linalg::l_mul(&st.factor, &z);
                    out.extend(st.mu.iter().zip(&lz).map(|(m, v)| m + scale * v));
                }
            }
        }
    }
}

/// `k` i.i.d. draws from the centre. Equal seeds give bit-identical output.
pub fn sample_centre(sampler: &CentreSampler, k: usize, seed: u64) -> Result<OutcomeMatrix> {
    if k == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    sampler.validate()?;
    let mut out = Vec::with_capacity(k * sampler.dim());
    sampler.draw_into(&mut rng::stream(seed, 0), 0, k, &mut out);
    OutcomeMatrix::new(k, sampler.dim(), out)
}

/// Keeps the first `target_k` draws that fall in the bulk, drawing at most
/// `max_draw_factor · target_k` rows. The accepted rows are a prefix-filter
/// of `sample_centre(sampler, ·, seed)`.
pub fn rejection_sample_bulk(
    sampler: &CentreSampler,
    bulk: &BulkSet,
    target_k: usize,
    max_draw_factor: f64,
    seed: u64,
) -> Result<OutcomeMatrix> {
    if target_k == 0 {
        return Err(Error::invalid("target sample count must be >= 1"));
    }
    if !(max_draw_factor >= 1.0) {
        return Err(Error::invalid("max draw factor must be >= 1"));
    }
    sampler.validate()?;
    let d = sampler.dim();
    check_dim(bulk.dim(), d)?;
    let budget = (max_draw_factor * target_k as f64).floor() as usize;
    let mut rng = rng::stream(seed, 0);
    let mut accepted = Vec::with_capacity(target_k * d);
    let (mut drawn, mut n_acc) = (0, 0);
    let mut chunk = Vec::with_capacity(target_k * d);
    while n_acc < target_k && drawn < budget {
        let count = (target_k - n_acc).max(64).min(budget - drawn);
        chunk.clear();
        sampler.draw_into(&mut rng, drawn, count, &mut chunk);
        drawn += count;
        for row in chunk.chunks_exact(d) {
            if n_acc < target_k && bulk.contains(row) {
                accepted.extend_from_slice(row);
                n_acc += 1;
            }
        }
    }
    if n_acc < target_k {
        return Err(Error::AcceptanceShortfall {
            accepted: n_acc,
            target: target_k,
            draws: drawn,
            rate: n_acc as f64 / drawn.max(1) as f64,
        });
    }
    OutcomeMatrix::new(target_k, d, accepted)
}

pub fn fit_empirical(data: OutcomeMatrix) -> CentreSampler {
    CentreSampler::Empirical { data }
}

/// Gaussian copula over `X` with empirical marginals, plus an OLS head for
/// `Y | X`. Draws are `(X, Y)` rows with `d + 1` columns.
pub fn fit_copula_centre(x: &OutcomeMatrix, y: &[f64], jitter: f64) -> Result<CentreSampler> {
    let (n, d) = (x.n_rows(), x.n_cols());
    check_dim(n, y.len())?;
    if n < d + 2 {
        return Err(Error::invalid(format!(
            "copula fitting needs at least d + 2 = {} rows, got {n}",
            d + 2
        )));
    }
    if !(jitter >= 0.0) {
        return Err(Error::invalid("jitter must be nonnegative"));
    }
    let std = Normal::standard();
    let (lo, hi) = (1.0 / (n as f64 + 1.0), n as f64 / (n as f64 + 1.0));
    let mut marginals = Vec::with_capacity(d);
    let mut z = vec![0.0; n * d];
    for j in 0..d {
        let col = x.column(j);
        let table = EcdfTable::fit(&col)?;
        for (i, v) in col.iter().enumerate() {
            z[i * d + j] = std.inverse_cdf(table.eval(*v).clamp(lo, hi));
        }
        marginals.push(table);
    }
    let (_, mut cov) = linalg::sample_covariance(&z, d);
    for i in 0..d {
        cov[(i, i)] += jitter;
    }
    let latent_factor =
        linalg::cholesky_lower(&cov).map_err(|e| e.context("latent copula covariance"))?;
    let (w, b0) = linalg::ols(x.values(), d, y)?;
    let mse = x
        .rows()
        .zip(y)
        .map(|(r, yi)| (yi - linalg::dot(&w, r) - b0).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok(CentreSampler::GaussianCopula(CopulaCentre {
        marginals,
        latent_factor,
        jitter,
        head: RegressionHead {
            w,
            b0,
            sigma_y: mse.sqrt(),
        },
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub nu: f64,
    /// `None` uses [`NiwPrior::weak`].
    pub prior: Option<NiwPrior>,
    /// Total iterations including burn-in.
    pub iters: usize,
    pub burn_in: usize,
    pub ridge: f64,
}

impl GibbsConfig {
    /// Default burn-in and prior with `retained` post-burn-in states.
    pub fn with_retained(nu: f64, retained: usize) -> Self {
        Self {
            nu,
            prior: None,
            iters: DEFAULT_BURN_IN + retained,
            burn_in: DEFAULT_BURN_IN,
            ridge: TOL.gibbs_ridge,
        }
    }
}

/// Gibbs sampler for the multivariate Student-t model with a
/// normal-inverse-Wishart prior, via the Gamma scale-mixture representation.
pub fn fit_student_t_gibbs(
    data: &OutcomeMatrix,
    cfg: &GibbsConfig,
    seed: u64,
) -> Result<CentreSampler> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if n <= d {
        return Err(Error::invalid(format!("Gibbs fitting needs n > d, got n = {n}, d = {d}")));
    }
    if cfg.iters <= cfg.burn_in {
        return Err(Error::invalid("iterations must exceed burn-in"));
    }
    if !(cfg.nu > 0.0) {
        return Err(Error::invalid("degrees of freedom must be positive"));
    }
    let prior = cfg.prior.clone().unwrap_or_else(|| NiwPrior::weak(data));
    check_dim(d, prior.mu0.len())?;
    if !(prior.kappa0 > 0.0 && prior.nu0 > d as f64 - 1.0) {
        return Err(Error::invalid("NIW prior needs kappa0 > 0 and nu0 > d - 1"));
    }
    let mut rng = rng::stream(seed, 0);
    let x = data.values();

    let (mut mu, mut sigma) = linalg::sample_covariance(x, d);
    for i in 0..d {
        sigma[(i, i)] += cfg.ridge;
    }
    let mut factor = linalg::cholesky_lower(&sigma).map_err(|e| e.context("initial Gibbs scale"))?;
    let mut w = vec![1.0; n];
    let mut states = Vec::with_capacity(cfg.iters - cfg.burn_in);
    let shape = 0.5 * (cfg.nu + d as f64);
    let nu_n = prior.nu0 + n as f64;
    let mut diff = vec![0.0; d];

    for it in 0..cfg.iters {
        // latent weights
        for (i, row) in x.chunks_exact(d).enumerate() {
            for k in 0..d {
                diff[k] = row[k] - mu[k];
            }
            let m = linalg::norm2(&linalg::solve_lower(&factor, &diff)).powi(2);
            let rate = 0.5 * (cfg.nu + m);
            w[i] = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(&mut rng);
        }

        // weighted NIW update
        let total: f64 = w.iter().sum();
        let mut xbar = vec![0.0; d];
        for (wi, row) in w.iter().zip(x.chunks_exact(d)) {
            for k in 0..d {
                xbar[k] += wi * row[k];
            }
        }
        xbar.iter_mut().for_each(|v| *v /= total);
        let mut psi = prior.psi0.clone();
        for (wi, row) in w.iter().zip(x.chunks_exact(d)) {
            for a in 0..d {
                let da = row[a] - xbar[a];
                for b in 0..=a {
                    psi[(a, b)] += wi * da * (row[b] - xbar[b]);
                }
            }
        }
        let kappa_n = prior.kappa0 + total;
        let shrink = prior.kappa0 * total / kappa_n;
        for a in 0..d {
            for b in 0..=a {
                psi[(a, b)] += shrink * (xbar[a] - prior.mu0[a]) * (xbar[b] - prior.mu0[b]);
            }
            psi[(a, a)] += cfg.ridge;
        }
        for a in 0..d {
            for b in 0..a {
                psi[(b, a)] = psi[(a, b)];
            }
        }
        let mu_n: Vec<f64> = (0..d)
            .map(|k| (prior.kappa0 * prior.mu0[k] + total * xbar[k]) / kappa_n)
            .collect();

        sigma = sample_inverse_wishart(&psi, nu_n, &mut rng)
            .map_err(|e| e.context(format!("Gibbs iteration {it}")))?;
        factor = linalg::cholesky_lower(&sigma).map_err(|e| e.context(format!("Gibbs iteration {it}")))?;
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let lz = linalg::l_mul(&factor, &z);
        let s = kappa_n.sqrt();
        mu = mu_n.iter().zip(&lz).map(|(m, v)| m + v / s).collect();

        if it >= cfg.burn_in {
            states.push(GibbsState {
                mu: mu.clone(),
                factor: factor.clone(),
            });
        }
    }

    Ok(CentreSampler::StudentTPredictive(StudentTPredictive {
        nu: cfg.nu,
        prior,
        burn_in: cfg.burn_in,
        ridge: cfg.ridge,
        states,
    }))
}

/// `Σ ~ IW(ν, Ψ)` by the Bartlett decomposition: with `Ψ = UUᵀ` and `A`
/// lower-triangular (`A_ii = √χ²_{ν−i}`, `A_ij ~ N(0,1)`), `Σ = (UA⁻ᵀ)(UA⁻ᵀ)ᵀ`.
pub fn sample_inverse_wishart(psi: &DMatrix<f64>, nu: f64, rng: &mut Rng) -> Result<DMatrix<f64>> {
    let d = psi.nrows();
    let u = linalg::cholesky_lower(psi)?;
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(nu - i as f64)
            .map_err(|e| Error::invalid(format!("inverse-Wishart degrees of freedom: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let a_inv = a
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::invalid("singular Bartlett factor"))?;
    let m = &u * a_inv.transpose();
    let mut sigma = &m * m.transpose();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{calibrate, Geometry};

    fn normal_rows(n: usize, d: usize, seed: u64) -> OutcomeMatrix {
        let mut r = rng::stream(seed, 0);
        let v: Vec<f64> = (0..n * d).map(|_| r.sample(StandardNormal)).collect();
        OutcomeMatrix::new(n, d, v).unwrap()
    }

    fn ks_distance(sample: &[f64], reference: &EcdfTable) -> f64 {
        let mut s = sample.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let mut worst = 0.0f64;
        for (i, v) in s.iter().enumerate() {
            let f = reference.eval(*v);
            worst = worst.max((f - (i + 1) as f64 / n).abs()).max((f - i as f64 / n).abs());
        }
        worst
    }

    #[test]
    fn ecdf_inverse_is_left_continuous() {
        let t = EcdfTable::fit(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(t.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(t.cdf, vec![0.25, 0.75, 1.0]);
        assert_eq!(t.quantile(0.25), 1.0);
        assert_eq!(t.quantile(0.26), 2.0);
        assert_eq!(t.quantile(0.75), 2.0);
        assert_eq!(t.quantile(0.9), 3.0);
        assert_eq!(t.eval(0.5), 0.0);
        assert_eq!(t.eval(2.0), 0.75);
    }

    #[test]
    fn empirical_single_row() {
        let data = OutcomeMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let s = sample_centre(&fit_empirical(data), 5, 1).unwrap();
        assert!(s.rows().all(|r| r == [1.0, 2.0]));
    }

    #[test]
    fn copula_marginals_match_fitting_data() {
        let x = normal_rows(5000, 2, 11);
        let y: Vec<f64> = x.rows().map(|r| r[0] - r[1]).collect();
        let c = fit_copula_centre(&x, &y, 1e-6).unwrap();
        let s = sample_centre(&c, 5000, 12).unwrap();
        let CentreSampler::GaussianCopula(cc) = &c else { unreachable!() };
        for j in 0..2 {
            let ks = ks_distance(&s.column(j), &cc.marginals[j]);
            assert!(ks <= 0.05, "coordinate {j}: KS = {ks}");
        }
        assert!(cc.head.sigma_y <= 1e-8);
    }

    #[test]
    fn copula_latent_covariance_tracks_correlation() {
        let base = normal_rows(5000, 2, 21);
        let rows: Vec<Vec<f64>> = base.rows().map(|r| vec![r[0], 0.6 * r[0] + 0.8 * r[1]]).collect();
        let x = OutcomeMatrix::from_rows(&rows).unwrap();
        let y = vec![0.0; 5000];
        let CentreSampler::GaussianCopula(c) = fit_copula_centre(&x, &y, 1e-6).unwrap() else {
            unreachable!()
        };
        let sigma = &c.latent_factor * c.latent_factor.transpose();
        let (_, cov) = linalg::sample_covariance(x.values(), 2);
        let corr = cov[(0, 1)] / (cov[(0, 0)] * cov[(1, 1)]).sqrt();
        assert!((sigma[(0, 1)] - corr).abs() < 0.1);
        assert!((sigma[(0, 0)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn copula_rejects_duplicate_columns_without_jitter() {
        let base = normal_rows(200, 1, 5);
        let rows: Vec<Vec<f64>> = base.rows().map(|r| vec![r[0], r[0]]).collect();
        let x = OutcomeMatrix::from_rows(&rows).unwrap();
        let err = fit_copula_centre(&x, &vec![0.0; 200], 0.0).unwrap_err();
        assert!(err.to_string().contains("latent copula covariance"));
    }

    fn student_rows(n: usize, seed: u64) -> OutcomeMatrix {
        let mut r = rng::stream(seed, 0);
        let chi = ChiSquared::new(3.0f64).unwrap();
        let mut v = Vec::new();
        for _ in 0..n {
            let s = (3.0f64 / chi.sample(&mut r)).sqrt();
            let z0: f64 = r.sample(StandardNormal);
            let z1: f64 = r.sample(StandardNormal);
            v.push(30.0 + 10.0 * s * z0);
            v.push(30.0 + 11.0 * s * (0.6 * z0 + 0.8 * z1));
        }
        OutcomeMatrix::new(n, 2, v).unwrap()
    }

    #[test]
    fn student_t_predictive_mean() {
        let data = student_rows(2000, 3);
        let s = fit_student_t_gibbs(&data, &GibbsConfig::with_retained(3.0, 2500), 4).unwrap();
        let draws = sample_centre(&s, 2500, 5).unwrap();
        for j in 0..2 {
            let m: f64 = draws.column(j).iter().sum::<f64>() / 2500.0;
            assert!((m - 30.0).abs() < 1.0, "coordinate {j}: {m}");
        }
        let CentreSampler::StudentTPredictive(p) = &s else { unreachable!() };
        assert_eq!(p.burn_in, 200);
        assert_eq!(p.ridge, 1e-6);
        for st in &p.states {
            assert!(linalg::cholesky_lower(&(&st.factor * st.factor.transpose())).is_ok());
        }
    }

    #[test]
    fn gibbs_with_huge_nu_is_gaussian() {
        let data = normal_rows(400, 2, 8);
        let s = fit_student_t_gibbs(&data, &GibbsConfig::with_retained(1e6, 400), 9).unwrap();
        let CentreSampler::StudentTPredictive(p) = &s else { unreachable!() };
        let post = p.posterior_mean_mu();
        let mean = linalg::column_means(data.values(), 2);
        let se = 1.0 / (400f64).sqrt();
        for j in 0..2 {
            assert!((post[j] - mean[j]).abs() < 2.0 * se, "{j}: {} vs {}", post[j], mean[j]);
        }
    }

    #[test]
    fn gibbs_on_identical_rows() {
        let data = OutcomeMatrix::from_rows(&vec![vec![2.0, -1.0]; 500]).unwrap();
        let s = fit_student_t_gibbs(&data, &GibbsConfig::with_retained(3.0, 200), 1).unwrap();
        let CentreSampler::StudentTPredictive(p) = &s else { unreachable!() };
        let post = p.posterior_mean_mu();
        assert!((post[0] - 2.0).abs() < 0.05 && (post[1] + 1.0).abs() < 0.05, "{post:?}");
    }

    #[test]
    fn gibbs_preconditions() {
        let data = normal_rows(2, 2, 1);
        assert!(fit_student_t_gibbs(&data, &GibbsConfig::with_retained(3.0, 10), 1).is_err());
        let data = normal_rows(50, 2, 1);
        let cfg = GibbsConfig {
            iters: 10,
            burn_in: 10,
            ..GibbsConfig::with_retained(3.0, 1)
        };
        assert!(fit_student_t_gibbs(&data, &cfg, 1).is_err());
    }

    #[test]
    fn unfitted_sampler_is_rejected() {
        let s = CentreSampler::StudentTPredictive(StudentTPredictive {
            nu: 3.0,
            prior: NiwPrior::weak(&normal_rows(10, 2, 1)),
            burn_in: 0,
            ridge: 0.0,
            states: vec![],
        });
        assert!(sample_centre(&s, 3, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let data = student_rows(300, 1);
        let samplers = [
            fit_empirical(data.clone()),
            fit_copula_centre(&data.select_cols(&[0]).unwrap(), &data.column(1), 1e-6).unwrap(),
            fit_student_t_gibbs(&data, &GibbsConfig::with_retained(3.0, 50), 2).unwrap(),
        ];
        for s in &samplers {
            assert_eq!(sample_centre(s, 100, 7).unwrap(), sample_centre(s, 100, 7).unwrap());
        }
    }

    #[test]
    fn rejection_sampling_whole_space_and_calibrated() {
        let data = normal_rows(4000, 2, 31);
        let sampler = fit_empirical(data.clone());
        let huge = BulkSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0], 1e12).unwrap();
        let got = rejection_sample_bulk(&sampler, &huge, 50, 1.0, 3).unwrap();
        assert_eq!(got, sample_centre(&sampler, 50, 3).unwrap());

        let cal = calibrate(&data, Geometry::Ellipsoid, 0.05, 0.05, 0.5, 4).unwrap();
        let bulk = cal.bulk().unwrap();
        let fresh = fit_empirical(normal_rows(20_000, 2, 32));
        let draws = sample_centre(&fresh, 2000, 5).unwrap();
        let rate = draws.rows().filter(|r| bulk.contains(r)).count() as f64 / 2000.0;
        assert!(rate >= 0.9, "acceptance {rate}");
        let kept = rejection_sample_bulk(&fresh, &bulk, 1000, 2.0, 5).unwrap();
        assert!(kept.rows().all(|r| bulk.contains(r)));
    }

    #[test]
    fn rejection_shortfall_reports_rate() {
        let data = normal_rows(100, 1, 1);
        let tiny = BulkSet::boxed(vec![100.0], vec![1.0], 0.5).unwrap();
        match rejection_sample_bulk(&fit_empirical(data), &tiny, 10, 2.0, 1) {
            Err(Error::AcceptanceShortfall { accepted, draws, rate, .. }) => {
                assert_eq!(accepted, 0);
                assert_eq!(draws, 20);
                assert_eq!(rate, 0.0);
            }
            other => panic!("expected shortfall, got {other:?}"),
        }
    }
}
