//! Cutting-plane engine with trust-region stabilization, and the projected
//! subgradient fallback.

use std::time::Instant;

use super::lp::{CutLp, Cuts};
use super::{Domain, Method, ObjectiveOracle, SolveOptions, SolveReport};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::tolerances::TOL;

const MAX_BOX_EXPANSIONS: usize = 60;
/// Distance to a non-domain face, as a fraction of the box width, below
/// which a point counts as touching the face.
const FACE_FRACTION: f64 = 1e-3;
const SERIOUS_RATIO: f64 = 0.1;

struct Evaluated {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

fn evaluate(oracle: &dyn ObjectiveOracle, x: &[f64]) -> Result<Evaluated> {
    let mut g = vec![0.0; x.len()];
    let f = oracle.eval(x, &mut g);
    if !f.is_finite() {
        return Err(Error::Solver(format!("objective is not finite at {x:?}")));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(format!("subgradient is not finite at {x:?}")));
    }
    Ok(Evaluated { x: x.to_vec(), f, g })
}

/// Checks the new point against every stored cut and the new cut against
/// every stored point.
fn convexity_guard(cuts: &Cuts, e: &Evaluated) -> Result<()> {
    for k in 0..cuts.len() {
        let xk = cuts.point(k);
        let fk = cuts.value(k);
        let lin_k: f64 = cuts.grad(k).iter().zip(e.x.iter().zip(xk)).map(|(g, (a, b))| g * (a - b)).sum();
        let lin_new: f64 = e.g.iter().zip(xk.iter().zip(&e.x)).map(|(g, (a, b))| g * (a - b)).sum();
        let scale = 1.0 + e.f.abs() + fk.abs() + lin_k.abs().max(lin_new.abs());
        let slack = TOL.subgradient * scale;
        if e.f < fk + lin_k - slack {
            return Err(Error::Solver(format!(
                "subgradient inequality violated: f({:?}) = {} below cut from {:?} ({})",
                e.x,
                e.f,
                xk,
                fk + lin_k
            )));
        }
        if fk < e.f + lin_new - slack {
            return Err(Error::Solver(format!(
                "subgradient inequality violated: f({:?}) = {} below cut from {:?} ({})",
                xk,
                fk,
                e.x,
                e.f + lin_new
            )));
        }
    }
    Ok(())
}

pub(crate) fn initial_box(oracle: &dyn ObjectiveOracle, x0: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x0.len();
    let domain = oracle.domain();
    let hint = match &opts.initial_box {
        Some(b) => Some(b.clone()),
        None => oracle.box_hint(),
    };
    let (mut lo, mut hi): (Vec<f64>, Vec<f64>) = match hint {
        Some(b) => {
            if b.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: b.len(),
                });
            }
            b.into_iter().unzip()
        }
        None => x0
            .iter()
            .map(|v| {
                let r = 10.0 * (1.0 + v.abs());
                (v - r, v + r)
            })
            .unzip(),
    };
    for i in 0..n {
        if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] <= hi[i]) {
            return Err(Error::invalid(format!("invalid box [{}, {}] for coordinate {i}", lo[i], hi[i])));
        }
        if domain.nonnegative(i) {
            lo[i] = 0.0;
        }
        // the box must contain x0 with room to move
        let w = (hi[i] - lo[i]).max(1e-8 * (1.0 + x0[i].abs())).max(1e-8);
        if x0[i] + 0.5 * w > hi[i] {
            hi[i] = x0[i] + 0.5 * w;
        }
        if !domain.nonnegative(i) && x0[i] - 0.5 * w < lo[i] {
            lo[i] = x0[i] - 0.5 * w;
        }
        if hi[i] <= lo[i] {
            hi[i] = lo[i] + w;
        }
    }
    Ok((lo, hi))
}

fn on_free_face(x: &[f64], lo: &[f64], hi: &[f64], domain: Domain) -> bool {
    (0..x.len()).any(|i| {
        let tol = FACE_FRACTION * (hi[i] - lo[i]);
        hi[i] - x[i] <= tol || (!domain.nonnegative(i) && x[i] - lo[i] <= tol)
    })
}

fn expand_box(lo: &mut [f64], hi: &mut [f64], domain: Domain) {
    for i in 0..lo.len() {
        let w = hi[i] - lo[i];
        if domain.nonnegative(i) {
            hi[i] += w;
        } else {
            lo[i] -= 0.5 * w;
            hi[i] += 0.5 * w;
        }
    }
}

pub(crate) fn cutting_plane(
    oracle: &dyn ObjectiveOracle,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let n = x0.len();
    let domain = oracle.domain();
    let (mut lo, mut hi) = initial_box(oracle, x0, opts)?;

    let mut cuts = Cuts::new(n);
    let first = evaluate(oracle, x0)?;
    cuts.push(&first.x, first.f, &first.g);
    let mut best = first;
    let mut full = CutLp::new();
    let mut trust = CutLp::new();
    // trust radius as a fraction of the box width
    let mut radius = 0.1;
    let mut expansions = 0;
    let mut lower = f64::NEG_INFINITY;

    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let kelley = full.solve(&cuts, &lo, &hi);
        lower = kelley.lower_bound;
        let upper = best.f;
        if upper - lower <= opts.tol * (1.0 + upper.abs()) {
            if on_free_face(&best.x, &lo, &hi, domain) || on_free_face(&kelley.x, &lo, &hi, domain) {
                expansions += 1;
                if expansions > MAX_BOX_EXPANSIONS {
                    return Err(Error::Solver(
                        "objective appears unbounded below: search box kept growing".into(),
                    ));
                }
                expand_box(&mut lo, &mut hi, domain);
                continue;
            }
            return Ok(SolveReport {
                minimizer: best.x,
                objective: upper,
                certified_gap: Some((upper - lower).max(0.0)),
                converged: true,
                iterations,
                wall_seconds: Some(start.elapsed().as_secs_f64()),
                method: Method::CuttingPlane,
            });
        }

        let center = best.x.clone();
        let (tlo, thi): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|i| {
                let r = radius * (hi[i] - lo[i]);
                ((center[i] - r).max(lo[i]), (center[i] + r).min(hi[i]))
            })
            .unzip();
        let step = trust.solve(&cuts, &tlo, &thi);
        let predicted = best.f - step.model_value;

        let trial = evaluate(oracle, &step.x)?;
        convexity_guard(&cuts, &trial)?;
        cuts.push(&trial.x, trial.f, &trial.g);
        let same = kelley.x.iter().zip(&step.x).all(|(a, b)| a == b);
        let extra = if same {
            None
        } else {
            let e = evaluate(oracle, &kelley.x)?;
            convexity_guard(&cuts, &e)?;
            cuts.push(&e.x, e.f, &e.g);
            Some(e)
        };

        if predicted > 0.0 {
            let ratio = (best.f - trial.f) / predicted;
            let at_edge = (0..n).any(|i| {
                let r = radius * (hi[i] - lo[i]);
                (trial.x[i] - center[i]).abs() >= 0.99 * r
            });
            if ratio >= SERIOUS_RATIO && at_edge {
                radius = (radius * 2.0).min(1.0);
            } else if ratio < 0.0 {
                radius = (radius * 0.5).max(1e-12);
            }
        }
        if trial.f < best.f {
            best = trial;
        }
        if let Some(e) = extra {
            if e.f < best.f {
                best = e;
            }
        }
    }

    let gap = (best.f - lower).max(0.0);
    Ok(SolveReport {
        minimizer: best.x,
        objective: best.f,
        certified_gap: lower.is_finite().then_some(gap),
        converged: false,
        iterations,
        wall_seconds: Some(start.elapsed().as_secs_f64()),
        method: Method::CuttingPlane,
    })
}

pub(crate) fn subgradient(
    oracle: &dyn ObjectiveOracle,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let domain = oracle.domain();
    let (lo, hi) = initial_box(oracle, x0, opts)?;
    let scale = norm2(&lo.iter().zip(&hi).map(|(a, b)| b - a).collect::<Vec<_>>()) * 0.1;
    let mut x = x0.to_vec();
    let mut best = evaluate(oracle, &x)?;
    let mut current_g = best.g.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;
        let gn = norm2(&current_g);
        if gn == 0.0 {
            converged = true;
            break;
        }
        let step = scale / (gn * ((iterations as f64).sqrt()));
        for (i, xi) in x.iter_mut().enumerate() {
            *xi -= step * current_g[i];
            if domain.nonnegative(i) && *xi < 0.0 {
                *xi = 0.0;
            }
        }
        let e = evaluate(oracle, &x)?;
        current_g = e.g.clone();
        if e.f < best.f {
            best = e;
        }
    }
    Ok(SolveReport {
        minimizer: best.x,
        objective: best.f,
        certified_gap: None,
        converged,
        iterations,
        wall_seconds: Some(start.elapsed().as_secs_f64()),
        method: Method::Subgradient,
    })
}
