//! Monte Carlo check of the risk certificate on a discrete world where
//! every quantity in the bound can be computed exactly.
//!
//! Each trial draws training data from a known law `P*` on a grid of atoms,
//! calibrates a box bulk set by DKW selection, takes the empirical law of
//! the training data as the centre and deploys against
//! `P̃ = (1 − ε*)P* + ε*R̃` with a known contaminant `R̃` that puts mass both
//! inside and outside the bulk. The bound is evaluated at several decisions
//! for the loss `|ξ − x|` and compared with the mean loss of a fresh
//! deployment sample.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, StudentsT};

use crate::calibrate::{calibrate, lv_distortion_discrete, Geometry};
use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, OutcomeMatrix};
use crate::rng::{self, child_seed};
use crate::worstcase::{certificate_bound, CertificateInputs};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateConfig {
    pub trials: usize,
    pub n_train: usize,
    /// Share of the training rows used to fit the score; the rest select
    /// the threshold.
    pub fit_ratio: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eps_star: f64,
    /// Atoms of `P*` are `−half_width, −half_width + step, …, half_width`
    /// weighted by a Student-t density with `nu` degrees of freedom.
    pub half_width: f64,
    pub step: f64,
    pub nu: f64,
    /// Atoms and weights of the contaminant `R̃`.
    pub contaminant_atoms: Vec<f64>,
    pub contaminant_probs: Vec<f64>,
    /// Decisions at which the bound is checked.
    pub decisions: Vec<f64>,
    /// Moment order `p` of the tail term.
    pub moment: f64,
    pub n_deploy: usize,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            n_train: 2000,
            fit_ratio: 0.5,
            gamma: 0.05,
            delta: 0.05,
            eps_star: 0.1,
            half_width: 6.0,
            step: 0.5,
            nu: 3.0,
            contaminant_atoms: vec![1.0, 9.0],
            contaminant_probs: vec![0.5, 0.5],
            decisions: vec![-1.0, 0.0, 0.5, 2.0],
            moment: 2.0,
            n_deploy: 5000,
        }
    }
}

/// Result of one trial at its least favourable decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateTrial {
    pub trial: usize,
    /// Bulk mass under `P*`; the certificate assumes at least `1 − γ`.
    pub bulk_mass: f64,
    pub eps_c: f64,
    pub eps_eff: f64,
    /// Decision with the smallest `bound − empirical risk`.
    pub decision: f64,
    pub empirical_risk: f64,
    pub exact_risk: f64,
    pub bound: f64,
    /// The bound holds at every decision.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateStudy {
    pub trials: Vec<CertificateTrial>,
    pub hold_rate: f64,
    /// Fraction of trials whose bulk actually carried mass `≥ 1 − γ`.
    pub coverage_rate: f64,
}

fn world(cfg: &CertificateConfig) -> Result<(DiscreteDistribution<f64>, DiscreteDistribution<f64>)> {
    if !(cfg.step > 0.0 && cfg.half_width > 0.0) {
        return Err(Error::invalid("atom grid needs positive step and half width"));
    }
    let t = StudentsT::new(0.0, 1.0, cfg.nu).map_err(|e| Error::invalid(e.to_string()))?;
    let k = (cfg.half_width / cfg.step).round() as i64;
    let atoms: Vec<f64> = (-k..=k).map(|i| i as f64 * cfg.step).collect();
    let w: Vec<f64> = atoms.iter().map(|a| t.pdf(*a)).collect();
    let s: f64 = w.iter().sum();
    let p_star = DiscreteDistribution::new(atoms, w.iter().map(|v| v / s).collect())?;
    let r = DiscreteDistribution::new(cfg.contaminant_atoms.clone(), cfg.contaminant_probs.clone())?;
    Ok((p_star, r))
}

fn draw(dist: &DiscreteDistribution<f64>, rng: &mut rng::Rng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, p) in dist.atoms().iter().zip(dist.probs()) {
        acc += p;
        if u < acc {
            return *a;
        }
    }
    *dist.atoms().last().expect("nonempty")
}

/// Restriction of `d` to the atoms where `keep` holds, renormalized.
fn conditional(d: &DiscreteDistribution<f64>, keep: impl Fn(f64) -> bool) -> Option<DiscreteDistribution<f64>> {
    let (atoms, probs): (Vec<f64>, Vec<f64>) = d
        .atoms()
        .iter()
        .zip(d.probs())
        .filter(|(a, p)| keep(**a) && **p > 0.0)
        .map(|(a, p)| (*a, *p))
        .unzip();
    let s: f64 = probs.iter().sum();
    if s <= 0.0 {
        return None;
    }
    DiscreteDistribution::new(atoms, probs.iter().map(|p| p / s).collect()).ok()
}

fn run_trial(cfg: &CertificateConfig, p_star: &DiscreteDistribution<f64>, r: &DiscreteDistribution<f64>, trial: usize, seed: u64) -> Result<CertificateTrial> {
    let seed = child_seed(seed, trial as u64);
    let mut rng = rng::stream(seed, 0);
    let train: Vec<f64> = (0..cfg.n_train).map(|_| draw(p_star, &mut rng)).collect();
    let data = OutcomeMatrix::new(cfg.n_train, 1, train.clone())?;
    let cal = calibrate(&data, Geometry::Box, cfg.gamma, cfg.delta, cfg.fit_ratio, child_seed(seed, 1))?;
    cal.result.require_certified()?;
    let in_bulk = |a: f64| cal.score.score(&[a]) <= cal.result.threshold;
    // the bulk is an interval; the loss is convex so its sup sits at an end
    let bulk = cal.bulk()?;
    let (lo, hi) = (-bulk.support_value(&[-1.0]), bulk.support_value(&[1.0]));

    let bulk_mass = p_star.expect(|a| if in_bulk(*a) { 1.0 } else { 0.0 });
    let r_mass = r.expect(|a| if in_bulk(*a) { 1.0 } else { 0.0 });
    let deploy = p_star.mixture(r, cfg.eps_star)?;
    let deploy_mass = deploy.expect(|a| if in_bulk(*a) { 1.0 } else { 0.0 });

    // centre: empirical law of the training data
    let mut atoms: Vec<f64> = train.clone();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    let counts: Vec<f64> = atoms.iter().map(|a| train.iter().filter(|t| *t == a).count() as f64).collect();
    let centre = DiscreteDistribution::new(atoms, counts.iter().map(|c| c / cfg.n_train as f64).collect())?;
    let centre_bulk = conditional(&centre, in_bulk).ok_or_else(|| Error::invalid("centre has no in-bulk mass"))?;
    let star_bulk = conditional(p_star, in_bulk).ok_or_else(|| Error::invalid("bulk has no P* mass"))?;
    let eps_c = lv_distortion_discrete(&star_bulk, &centre_bulk);
    if eps_c >= 1.0 {
        return Err(Error::invalid("centre mismatch is total"));
    }

    let mut drng = rng::stream(seed, 2);
    let deploy_sample: Vec<f64> = (0..cfg.n_deploy).map(|_| draw(&deploy, &mut drng)).collect();

    let mut worst: Option<(f64, f64, f64, f64, f64)> = None;
    let mut holds = true;
    let mut eps_eff = 0.0;
    for &x in &cfg.decisions {
        let f = |a: f64| (a - x).abs();
        let inputs = CertificateInputs {
            eps_c,
            eps_star: cfg.eps_star,
            rho: r_mass / deploy_mass,
            gamma: cfg.gamma,
            r_tilde_bulk_mass: r_mass,
            p: cfg.moment,
            m_p: deploy.expect(|a| f(*a).powf(cfg.moment)).powf(1.0 / cfg.moment),
            in_bulk_mean: centre_bulk.expect(|a| f(*a)),
            in_bulk_sup: f(lo).max(f(hi)),
        };
        eps_eff = inputs.effective_tolerance();
        let bound = certificate_bound(&inputs)?;
        let empirical = deploy_sample.iter().map(|a| f(*a)).sum::<f64>() / cfg.n_deploy as f64;
        let exact = deploy.expect(|a| f(*a));
        holds &= empirical <= bound;
        let slack = bound - empirical;
        if worst.is_none_or(|w| slack < w.0) {
            worst = Some((slack, x, empirical, exact, bound));
        }
    }
    let (_, decision, empirical_risk, exact_risk, bound) = worst.expect("at least one decision");
    Ok(CertificateTrial {
        trial,
        bulk_mass,
        eps_c,
        eps_eff,
        decision,
        empirical_risk,
        exact_risk,
        bound,
        holds,
    })
}

pub fn run_certificate_study(cfg: &CertificateConfig, seed: u64) -> Result<CertificateStudy> {
    if cfg.trials == 0 || cfg.decisions.is_empty() || cfg.n_deploy == 0 {
        return Err(Error::invalid("need trials, decisions and deployment draws"));
    }
    if !(0.0..1.0).contains(&cfg.eps_star) {
        return Err(Error::invalid("eps_star must lie in [0, 1)"));
    }
    let (p_star, r) = world(cfg)?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &p_star, &r, t, seed).map_err(|e| e.context(format!("trial {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let n = trials.len() as f64;
    Ok(CertificateStudy {
        hold_rate: trials.iter().filter(|t| t.holds).count() as f64 / n,
        coverage_rate: trials.iter().filter(|t| t.bulk_mass >= 1.0 - cfg.gamma).count() as f64 / n,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_holds() {
        let cfg = CertificateConfig {
            trials: 20,
            ..CertificateConfig::default()
        };
        let s = run_certificate_study(&cfg, 3).unwrap();
        assert_eq!(s.trials.len(), 20);
        assert!(s.hold_rate >= 0.9, "{}", s.hold_rate);
        for t in &s.trials {
            assert!(t.eps_eff >= t.eps_c - 1e-15);
            assert!(t.bound >= 0.0);
        }
    }

    #[test]
    fn contaminant_straddles_bulk() {
        let cfg = CertificateConfig {
            trials: 5,
            ..CertificateConfig::default()
        };
        let (p_star, r) = world(&cfg).unwrap();
        assert!((p_star.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.atoms(), &[1.0, 9.0]);
        // 9 lies beyond every atom of P*, so it is outside any fitted bulk
        assert!(p_star.atoms().iter().all(|a| *a < 9.0));
    }
}
