//! Numerical tolerances shared across the crate.
//!
//! Every threshold that decides a comparison, a termination or a validation
//! lives here so that tests and library code agree on the same numbers.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Probability vectors must sum to one within this absolute slack.
    pub prob_sum: f64,
    /// Slack subtracted before taking the ceiling in order-statistic indices,
    /// so that `m * (1/m)` lands on index 1 rather than 2.
    pub order_index_slack: f64,
    /// Relative slack for the subgradient inequality checked on every cut.
    pub subgradient: f64,
    /// Default relative optimality gap for the cutting-plane engine.
    pub solver_gap: f64,
    /// Default iteration budget for the cutting-plane engine.
    pub solver_max_iters: usize,
    /// Pivot and reduced-cost tolerance inside the simplex inner solver.
    pub simplex: f64,
    /// Ridge added to fitted covariance matrices before Cholesky.
    pub covariance_ridge: f64,
    /// Ridge added to the Gibbs scale matrix.
    pub gibbs_ridge: f64,
    /// Relative slack for in-bulk membership checks after floating point
    /// round trips (used by oracles, never by `bulk_contains`).
    pub membership: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        prob_sum: 1e-12,
        order_index_slack: 1e-9,
        subgradient: 1e-8,
        solver_gap: 1e-6,
        solver_max_iters: 5_000,
        simplex: 1e-10,
        covariance_ridge: 1e-8,
        gibbs_ridge: 1e-6,
        membership: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub const TOL: Tolerances = Tolerances::DEFAULT;
