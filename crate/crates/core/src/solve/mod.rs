//! Convex objectives and the minimization engine.
//!
//! Every objective is a value-and-subgradient oracle. [`minimize`] runs a
//! cutting-plane method: the Kelley model over all cuts is minimized over a
//! search box by an exact LP, which gives a certified lower bound, while a
//! second LP restricted to a trust box around the best point proposes the
//! next step. The box grows whenever the solution presses against a face
//! that is not part of the domain.

mod engine;
mod kl;
mod lp;
mod objectives;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::io::read_numeric_csv;
use crate::model::{BulkSet, DecisionLoss, OutcomeMatrix};
use crate::tolerances::TOL;

pub use kl::{kl_dual, kl_dual_value, KlDual};
pub use objectives::{
    build_cvar_objective, build_kl_bdro_objective, build_kl_objective, build_lv_objective, build_ridge_objective,
    build_saa_objective, build_wasserstein_lad_objective, loss_sup, slope_norm, CvarObjective, KlObjective,
    LvObjective, RidgeObjective, SaaObjective, WassersteinLad,
};

/// Feasible region of the decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Free,
    Nonnegative,
    /// The first `k` coordinates are nonnegative, the rest free.
    NonnegativePrefix(usize),
}

impl Domain {
    pub fn nonnegative(&self, i: usize) -> bool {
        match *self {
            Domain::Free => false,
            Domain::Nonnegative => true,
            Domain::NonnegativePrefix(k) => i < k,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, v)| v.is_finite() && (!self.nonnegative(i) || *v >= 0.0))
    }
}

/// A convex function given by values and subgradients.
pub trait ObjectiveOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn domain(&self) -> Domain {
        Domain::Free
    }

    /// Returns `f(x)` and overwrites `grad` with a subgradient at `x`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.eval(x, &mut g)
    }

    /// Default starting point.
    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Data-scaled starting box, one `(lo, hi)` pair per coordinate.
    fn box_hint(&self) -> Option<Vec<(f64, f64)>> {
        None
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    CuttingPlane,
    Subgradient,
    /// Direct linear-algebra solve (ridge only).
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub method: Method,
    /// Relative gap: stop when `upper − lower ≤ tol·(1 + |upper|)`.
    pub tol: f64,
    pub max_iters: usize,
    /// Overrides the objective's starting box.
    pub initial_box: Option<Vec<(f64, f64)>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::CuttingPlane,
            tol: TOL.solver_gap,
            max_iters: TOL.solver_max_iters,
            initial_box: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

mod gap_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    const UNCERTIFIED: &str = "uncertified";

    pub fn serialize<S: Serializer>(gap: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match gap {
            Some(g) => g.serialize(s),
            None => s.serialize_str(UNCERTIFIED),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Number(g) => Ok(Some(g)),
            Raw::Text(t) if t == UNCERTIFIED => Ok(None),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unexpected gap {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    /// `upper − lower` from the cutting-plane certificate, relative to the
    /// final search box; `None` (serialized as `"uncertified"`) when the
    /// method gives no certificate.
    #[serde(with = "gap_serde")]
    pub certified_gap: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    pub method: Method,
}

/// Minimizes a convex oracle from `x0`.
pub fn minimize(oracle: &dyn ObjectiveOracle, x0: &[f64], opts: &SolveOptions) -> Result<SolveReport> {
    check_dim(oracle.dim(), x0.len())?;
    let domain = oracle.domain();
    if !domain.contains(x0) {
        return Err(Error::invalid(format!("starting point {x0:?} is outside the domain {domain:?}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    match opts.method {
        Method::CuttingPlane => engine::cutting_plane(oracle, x0, opts),
        Method::Subgradient => engine::subgradient(oracle, x0, opts),
        Method::ClosedForm => Err(Error::invalid("closed-form solves exist only for ridge objectives")),
    }
}

/// [`minimize`] from the oracle's default starting point.
pub fn minimize_default(oracle: &dyn ObjectiveOracle, opts: &SolveOptions) -> Result<SolveReport> {
    minimize(oracle, &oracle.initial_point(), opts)
}

/// Ridge fit reported in the same shape as an iterative solve.
pub fn solve_ridge(obj: &RidgeObjective) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    let x = obj.solve_closed_form()?;
    Ok(SolveReport {
        objective: obj.value(&x),
        minimizer: x,
        certified_gap: Some(0.0),
        converged: true,
        iterations: 0,
        wall_seconds: Some(start.elapsed().as_secs_f64()),
        method: Method::ClosedForm,
    })
}

/// Matrix given inline as rows or by reference to a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataRef {
    Rows(Vec<Vec<f64>>),
    Csv { csv: PathBuf },
}

impl DataRef {
    pub fn load(&self) -> Result<OutcomeMatrix> {
        match self {
            DataRef::Rows(r) => OutcomeMatrix::from_rows(r),
            DataRef::Csv { csv } => read_numeric_csv(csv).map(|t| t.matrix),
        }
    }
}

/// Objective part of a [`ProblemSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Saa {
        loss: DecisionLoss,
        samples: DataRef,
    },
    Lv {
        loss: DecisionLoss,
        samples: DataRef,
        bulk: BulkSet,
        eps: f64,
    },
    Cvar {
        loss: DecisionLoss,
        samples: DataRef,
        eps: f64,
    },
    Kl {
        loss: DecisionLoss,
        samples: DataRef,
        eps: f64,
    },
    KlBdro {
        loss: DecisionLoss,
        draws: Vec<DataRef>,
        eps: f64,
    },
    /// Rows are `(x, y)` with the target last.
    WassersteinLad {
        data: DataRef,
        rho: f64,
        sigma_y: f64,
    },
    Ridge {
        data: DataRef,
        lambda: f64,
    },
}

/// Input of the `solve` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub options: SolveOptions,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn ObjectiveOracle>> {
        Ok(match &self.objective {
            ObjectiveSpec::Saa { loss, samples } => Box::new(build_saa_objective(*loss, samples.load()?)?),
            ObjectiveSpec::Lv {
                loss,
                samples,
                bulk,
                eps,
            } => Box::new(build_lv_objective(*loss, samples.load()?, bulk.clone(), *eps)?),
            ObjectiveSpec::Cvar { loss, samples, eps } => Box::new(build_cvar_objective(*loss, samples.load()?, *eps)?),
            ObjectiveSpec::Kl { loss, samples, eps } => Box::new(build_kl_objective(*loss, samples.load()?, *eps)?),
            ObjectiveSpec::KlBdro { loss, draws, eps } => {
                let d = draws.iter().map(DataRef::load).collect::<Result<Vec<_>>>()?;
                Box::new(build_kl_bdro_objective(*loss, d, *eps)?)
            }
            ObjectiveSpec::WassersteinLad { data, rho, sigma_y } => {
                Box::new(build_wasserstein_lad_objective(data.load()?, *rho, *sigma_y)?)
            }
            ObjectiveSpec::Ridge { data, lambda } => Box::new(build_ridge_objective(data.load()?, *lambda)?),
        })
    }

    pub fn solve(&self) -> Result<SolveReport> {
        if let ObjectiveSpec::Ridge { data, lambda } = &self.objective {
            if self.options.method == Method::ClosedForm {
                return solve_ridge(&build_ridge_objective(data.load()?, *lambda)?);
            }
        }
        let oracle = self.build()?;
        match &self.x0 {
            Some(x0) => minimize(oracle.as_ref(), x0, &self.options),
            None => minimize_default(oracle.as_ref(), &self.options),
        }
    }
}

#[cfg(test)]
mod tests;
