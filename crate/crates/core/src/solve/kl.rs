//! Dual of the KL-ball worst-case expectation over a uniform sample.
//!
//! `sup_{KL(Q‖P) ≤ ε} E_Q[ℓ] = inf_{λ>0} λε + λ log((1/n) Σ exp(ℓ_i/λ))`.

use crate::error::{Error, Result};

/// Value of the inner problem together with the exponential weights at the
/// returned multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct KlDual {
    pub value: f64,
    /// Inner multiplier; `None` for the closed-form endpoints (ε = 0 and
    /// saturation).
    pub lambda: Option<f64>,
    /// Weights of the worst-case reweighting, summing to one.
    pub weights: Vec<f64>,
}

const BISECT_ITERS: usize = 200;
const BRACKET_STEPS: usize = 400;
const LOG_LAMBDA_TOL: f64 = 1e-13;

fn phi(losses: &[f64], max: f64, eps: f64, lambda: f64) -> f64 {
    let n = losses.len() as f64;
    let s: f64 = losses.iter().map(|l| ((l - max) / lambda).exp()).sum::<f64>() / n;
    lambda * eps + max + lambda * s.ln()
}

fn softmax(losses: &[f64], max: f64, lambda: f64) -> Vec<f64> {
    let mut w: Vec<f64> = losses.iter().map(|l| ((l - max) / lambda).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Solves the inner problem by bisection on the sign of `dφ/dλ` over `log λ`.
///
/// When ε is at least `−log p_max`, with `p_max` the sample fraction that
/// attains the maximum loss, the infimum is exactly the maximum (attained as
/// λ → 0) and the weights put all mass on the first maximizer.
pub fn kl_dual(losses: &[f64], eps: f64) -> Result<KlDual> {
    if losses.is_empty() {
        return Err(Error::invalid("KL dual needs at least one loss"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("KL radius must be >= 0, got {eps}")));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("KL dual losses must be finite"));
    }
    let n = losses.len();
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    if eps == 0.0 {
        return Ok(KlDual {
            value: losses.iter().sum::<f64>() / n as f64,
            lambda: None,
            weights: vec![1.0 / n as f64; n],
        });
    }
    let at_max = losses.iter().filter(|&&l| l == max).count();
    if max == min || eps >= -((at_max as f64) / n as f64).ln() {
        let first = losses.iter().position(|&l| l == max).unwrap_or(0);
        let mut weights = vec![0.0; n];
        weights[first] = 1.0;
        return Ok(KlDual {
            value: max,
            lambda: None,
            weights,
        });
    }

    let spread = max - min;
    // dφ/dλ = ε + log s(λ) + Σ w_i (max − ℓ_i)/λ is increasing in λ, negative
    // as λ → 0 (no saturation) and tends to ε > 0; bisect its sign on log λ
    let slope = |t: f64| -> f64 {
        let lambda = t.exp();
        let w: Vec<f64> = losses.iter().map(|l| ((l - max) / lambda).exp()).collect();
        let s: f64 = w.iter().sum();
        let gap: f64 = w.iter().zip(losses).map(|(wi, l)| wi * (max - l)).sum::<f64>() / s;
        eps + (s / n as f64).ln() + gap / lambda
    };
    let mut a = (1e-6 * spread).ln();
    let mut b = (10.0 * spread).ln();
    for _ in 0..BRACKET_STEPS {
        if slope(a) < 0.0 {
            break;
        }
        a -= 2.0;
    }
    for _ in 0..BRACKET_STEPS {
        if slope(b) > 0.0 {
            break;
        }
        b += 2.0;
    }
    for _ in 0..BISECT_ITERS {
        if b - a <= LOG_LAMBDA_TOL {
            break;
        }
        let m = 0.5 * (a + b);
        if slope(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let t = 0.5 * (a + b);
    let ft = phi(losses, max, eps, t.exp());
    let lambda = t.exp();
    Ok(KlDual {
        value: ft.min(max),
        lambda: Some(lambda),
        weights: softmax(losses, max, lambda),
    })
}

/// Value-only convenience wrapper around [`kl_dual`].
pub fn kl_dual_value(losses: &[f64], eps: f64) -> Result<f64> {
    kl_dual(losses, eps).map(|k| k.value)
}
