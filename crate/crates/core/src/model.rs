//! Domain types shared by every other module: outcome samples, bulk sets,
//! piecewise-affine losses, decision losses and finite distributions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, matrix_rows};
use crate::tolerances::TOL;

/// Row-major matrix of i.i.d. outcomes, one outcome per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct OutcomeMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl OutcomeMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("outcome matrix needs at least one row and one column"));
        }
        check_dim(rows * cols, values.len())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len())?;
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::invalid(format!("row index {i} out of range")));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.cols, values)
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_cols(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::invalid(format!("column index {c} out of range")));
        }
        let values = self
            .rows()
            .flat_map(|r| cols.iter().map(move |&c| r[c]))
            .collect();
        Self::new(self.rows, cols.len(), values)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for OutcomeMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<OutcomeMatrix> for Vec<Vec<f64>> {
    fn from(m: OutcomeMatrix) -> Self {
        m.to_rows()
    }
}

/// A calibrated bounded region of outcome space.
///
/// `Ellipsoid` is `{ξ : ‖L⁻¹(ξ − center)‖₂ ≤ radius}`, `Box` is
/// `{ξ : max_i |ξ_i − center_i| / halfwidth_i ≤ radius}` and `Product`
/// intersects blocks that act on disjoint coordinate subsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BulkSet {
    Ellipsoid {
        center: Vec<f64>,
        #[serde(with = "matrix_rows")]
        factor: DMatrix<f64>,
        radius: f64,
    },
    Box {
        center: Vec<f64>,
        halfwidths: Vec<f64>,
        radius: f64,
    },
    Product {
        blocks: Vec<BulkBlock>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkBlock {
    pub indices: Vec<usize>,
    pub set: BulkSet,
}

impl BulkSet {
    pub fn ellipsoid(center: Vec<f64>, factor: DMatrix<f64>, radius: f64) -> Result<Self> {
        let b = BulkSet::Ellipsoid {
            center,
            factor,
            radius,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn boxed(center: Vec<f64>, halfwidths: Vec<f64>, radius: f64) -> Result<Self> {
        let b = BulkSet::Box {
            center,
            halfwidths,
            radius,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn product(blocks: Vec<BulkBlock>) -> Result<Self> {
        let b = BulkSet::Product { blocks };
        b.validate()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        match self {
            BulkSet::Ellipsoid { center, .. } | BulkSet::Box { center, .. } => center.len(),
            BulkSet::Product { blocks } => blocks.iter().map(|b| b.indices.len()).sum(),
        }
    }

    /// Checks the structural invariants; deserialized values should pass
    /// through here before use.
    pub fn validate(&self) -> Result<()> {
        match self {
            BulkSet::Ellipsoid {
                center,
                factor,
                radius,
            } => {
                let d = center.len();
                if d == 0 {
                    return Err(Error::invalid("empty ellipsoid center"));
                }
                if factor.nrows() != d || factor.ncols() != d {
                    return Err(Error::invalid(format!(
                        "ellipsoid factor must be {d}x{d}, got {}x{}",
                        factor.nrows(),
                        factor.ncols()
                    )));
                }
                for i in 0..d {
                    if !(factor[(i, i)] > 0.0) {
                        return Err(Error::invalid(format!(
                            "ellipsoid factor diagonal entry {i} must be positive"
                        )));
                    }
                    for j in i + 1..d {
                        if factor[(i, j)] != 0.0 {
                            return Err(Error::invalid("ellipsoid factor must be lower-triangular"));
                        }
                    }
                }
                check_radius(*radius)?;
                check_finite(center, "ellipsoid center")?;
                check_finite(factor.as_slice(), "ellipsoid factor")
            }
            BulkSet::Box {
                center,
                halfwidths,
                radius,
            } => {
                if center.is_empty() {
                    return Err(Error::invalid("empty box center"));
                }
                check_dim(center.len(), halfwidths.len())?;
                if halfwidths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                    return Err(Error::invalid("box halfwidths must be positive and finite"));
                }
                check_radius(*radius)?;
                check_finite(center, "box center")
            }
            BulkSet::Product { blocks } => {
                if blocks.is_empty() {
                    return Err(Error::invalid("product bulk needs at least one block"));
                }
                let d = self.dim();
                let mut seen = vec![false; d];
                for block in blocks {
                    if matches!(block.set, BulkSet::Product { .. }) {
                        return Err(Error::invalid("product blocks cannot be products"));
                    }
                    block.set.validate()?;
                    check_dim(block.indices.len(), block.set.dim())?;
                    for &i in &block.indices {
                        if i >= d || seen[i] {
                            return Err(Error::invalid(format!(
                                "product block indices must partition 0..{d}; index {i} is invalid or repeated"
                            )));
                        }
                        seen[i] = true;
                    }
                }
                Ok(())
            }
        }
    }

    /// Membership test. Panics on dimension mismatch; see [`bulk_contains`].
    pub fn contains(&self, xi: &[f64]) -> bool {
        match self {
            BulkSet::Ellipsoid {
                center,
                factor,
                radius,
            } => {
                let diff: Vec<f64> = xi.iter().zip(center).map(|(x, m)| x - m).collect();
                linalg::norm2(&linalg::solve_lower(factor, &diff)) <= *radius
            }
            BulkSet::Box {
                center,
                halfwidths,
                radius,
            } => xi
                .iter()
                .zip(center)
                .zip(halfwidths)
                .all(|((x, m), w)| (x - m).abs() / w <= *radius),
            BulkSet::Product { blocks } => blocks.iter().all(|b| {
                let sub: Vec<f64> = b.indices.iter().map(|&i| xi[i]).collect();
                b.set.contains(&sub)
            }),
        }
    }

    /// Support function `sup_{ξ ∈ S} aᵀξ`.
    pub fn support_value(&self, a: &[f64]) -> f64 {
        match self {
            BulkSet::Ellipsoid {
                center,
                factor,
                radius,
            } => linalg::dot(a, center) + radius * linalg::norm2(&linalg::lt_mul(factor, a)),
            BulkSet::Box {
                center,
                halfwidths,
                radius,
            } => {
                linalg::dot(a, center)
                    + radius * a.iter().zip(halfwidths).map(|(ai, w)| w * ai.abs()).sum::<f64>()
            }
            BulkSet::Product { blocks } => blocks
                .iter()
                .map(|b| {
                    let sub: Vec<f64> = b.indices.iter().map(|&i| a[i]).collect();
                    b.set.support_value(&sub)
                })
                .sum(),
        }
    }

    /// A maximizer of `aᵀξ` over the set; it is also a subgradient of the
    /// support function at `a`. At kinks (zero directions) the center is used.
    pub fn support_point(&self, a: &[f64]) -> Vec<f64> {
        match self {
            BulkSet::Ellipsoid {
                center,
                factor,
                radius,
            } => {
                let v = linalg::lt_mul(factor, a);
                let n = linalg::norm2(&v);
                if n == 0.0 {
                    return center.clone();
                }
                let u: Vec<f64> = v.iter().map(|x| x / n).collect();
                linalg::l_mul(factor, &u)
                    .iter()
                    .zip(center)
                    .map(|(s, m)| m + radius * s)
                    .collect()
            }
            BulkSet::Box {
                center,
                halfwidths,
                radius,
            } => center
                .iter()
                .zip(halfwidths)
                .zip(a)
                .map(|((m, w), ai)| {
                    if *ai > 0.0 {
                        m + radius * w
                    } else if *ai < 0.0 {
                        m - radius * w
                    } else {
                        *m
                    }
                })
                .collect(),
            BulkSet::Product { blocks } => {
                let mut out = vec![0.0; self.dim()];
                for b in blocks {
                    let sub: Vec<f64> = b.indices.iter().map(|&i| a[i]).collect();
                    for (k, v) in b.set.support_point(&sub).into_iter().enumerate() {
                        out[b.indices[k]] = v;
                    }
                }
                out
            }
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 && !r.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!("bulk radius must be >= 0, got {r}")))
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

/// Dimension-checked membership test.
pub fn bulk_contains(bulk: &BulkSet, xi: &[f64]) -> Result<bool> {
    check_dim(bulk.dim(), xi.len())?;
    Ok(bulk.contains(xi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    pub fn eval(&self, xi: &[f64]) -> f64 {
        linalg::dot(&self.slope, xi) + self.offset
    }
}

/// `f(ξ) = max_j (a_jᵀξ + b_j)` with at least one piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AffinePiece>", into = "Vec<AffinePiece>")]
pub struct PiecewiseAffineLoss {
    pieces: Vec<AffinePiece>,
}

impl PiecewiseAffineLoss {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::invalid("piecewise-affine loss needs at least one piece"))?;
        let d = first.slope.len();
        for p in &pieces {
            check_dim(d, p.slope.len())?;
            if !p.offset.is_finite() || p.slope.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("loss coefficients must be finite"));
            }
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].slope.len()
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(xi))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<AffinePiece>> for PiecewiseAffineLoss {
    type Error = Error;
    fn try_from(p: Vec<AffinePiece>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PiecewiseAffineLoss> for Vec<AffinePiece> {
    fn from(l: PiecewiseAffineLoss) -> Self {
        l.pieces
    }
}

pub fn evaluate_loss(loss: &PiecewiseAffineLoss, xi: &[f64]) -> Result<f64> {
    check_dim(loss.dim(), xi.len())?;
    Ok(loss.eval(xi))
}

pub const MAX_NEWSVENDOR_DIM: usize = 20;

/// A loss `ℓ(x; ξ)` that is convex in the decision `x` and piecewise affine
/// in the outcome `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionLoss {
    /// `Σ_j h[x_j − ξ_j]₊ + b[ξ_j − x_j]₊` with decision and outcome in ℝ^d.
    Newsvendor {
        holding: f64,
        backorder: f64,
        dim: usize,
    },
    /// `|y − wᵀx − b₀|` on outcomes `ξ = (x, y)`; the decision is `(w, b₀)`.
    LadRegression { features: usize },
}

impl DecisionLoss {
    pub fn newsvendor(holding: f64, backorder: f64, dim: usize) -> Result<Self> {
        if !(holding > 0.0 && backorder > 0.0) {
            return Err(Error::invalid("newsvendor costs must be positive"));
        }
        if dim == 0 {
            return Err(Error::invalid("newsvendor dimension must be >= 1"));
        }
        if dim > MAX_NEWSVENDOR_DIM {
            return Err(Error::TooManyPieces {
                d: dim,
                max: MAX_NEWSVENDOR_DIM,
            });
        }
        Ok(DecisionLoss::Newsvendor {
            holding,
            backorder,
            dim,
        })
    }

    pub fn lad(features: usize) -> Result<Self> {
        if features == 0 {
            return Err(Error::invalid("regression needs at least one feature"));
        }
        Ok(DecisionLoss::LadRegression { features })
    }

    pub fn decision_dim(&self) -> usize {
        match *self {
            DecisionLoss::Newsvendor { dim, .. } => dim,
            DecisionLoss::LadRegression { features } => features + 1,
        }
    }

    pub fn outcome_dim(&self) -> usize {
        match *self {
            DecisionLoss::Newsvendor { dim, .. } => dim,
            DecisionLoss::LadRegression { features } => features + 1,
        }
    }

    pub fn piece_count(&self) -> usize {
        match *self {
            DecisionLoss::Newsvendor { dim, .. } => 1 << dim,
            DecisionLoss::LadRegression { .. } => 2,
        }
    }

    /// Direct evaluation (no dimension checks).
    pub fn loss(&self, x: &[f64], xi: &[f64]) -> f64 {
        match *self {
            DecisionLoss::Newsvendor {
                holding, backorder, ..
            } => x
                .iter()
                .zip(xi)
                .map(|(xj, dj)| holding * (xj - dj).max(0.0) + backorder * (dj - xj).max(0.0))
                .sum(),
            DecisionLoss::LadRegression { features } => {
                let (w, b0) = x.split_at(features);
                (xi[features] - linalg::dot(w, &xi[..features]) - b0[0]).abs()
            }
        }
    }

    /// Adds `weight * g` to `grad`, where `g` is a subgradient of the loss in
    /// the decision. Kinks of `(·)₊` and `|·|` take the zero slope.
    pub fn add_subgradient(&self, x: &[f64], xi: &[f64], weight: f64, grad: &mut [f64]) {
        match *self {
            DecisionLoss::Newsvendor {
                holding, backorder, ..
            } => {
                for ((g, xj), dj) in grad.iter_mut().zip(x).zip(xi) {
                    if xj > dj {
                        *g += weight * holding;
                    } else if xj < dj {
                        *g -= weight * backorder;
                    }
                }
            }
            DecisionLoss::LadRegression { features } => {
                let (w, b0) = x.split_at(features);
                let r = xi[features] - linalg::dot(w, &xi[..features]) - b0[0];
                let s = if r > 0.0 {
                    -1.0
                } else if r < 0.0 {
                    1.0
                } else {
                    0.0
                };
                if s != 0.0 {
                    for k in 0..features {
                        grad[k] += weight * s * xi[k];
                    }
                    grad[features] += weight * s;
                }
            }
        }
    }

    /// The j-th affine piece in `ξ` at decision `x`.
    ///
    /// Newsvendor pieces are indexed by bit patterns: bit `i` of `j` selects
    /// `a_i = b` when set and `a_i = −h` otherwise; the offset is `−aᵀx`.
    pub fn piece(&self, x: &[f64], j: usize) -> AffinePiece {
        match *self {
            DecisionLoss::Newsvendor {
                holding,
                backorder,
                dim,
            } => {
                let slope: Vec<f64> = (0..dim)
                    .map(|i| if j >> i & 1 == 1 { backorder } else { -holding })
                    .collect();
                let offset = -linalg::dot(&slope, x);
                AffinePiece { slope, offset }
            }
            DecisionLoss::LadRegression { features } => {
                let (w, b0) = x.split_at(features);
                let sign = if j == 0 { 1.0 } else { -1.0 };
                let mut slope: Vec<f64> = w.iter().map(|v| -sign * v).collect();
                slope.push(sign);
                AffinePiece {
                    slope,
                    offset: -sign * b0[0],
                }
            }
        }
    }

    /// Adds `weight * ∂/∂x [a_j(x)ᵀξ* + b_j(x)]` to `grad` for a fixed point
    /// `ξ*`. With `ξ*` the maximizer of piece `j` over a bulk set this is a
    /// subgradient of the in-bulk supremum of that piece.
    pub fn add_piece_gradient(&self, j: usize, xi_star: &[f64], weight: f64, grad: &mut [f64]) {
        match *self {
            DecisionLoss::Newsvendor {
                holding,
                backorder,
                dim,
            } => {
                for (i, g) in grad.iter_mut().enumerate().take(dim) {
                    let a = if j >> i & 1 == 1 { backorder } else { -holding };
                    *g -= weight * a;
                }
            }
            DecisionLoss::LadRegression { features } => {
                let sign = if j == 0 { 1.0 } else { -1.0 };
                for k in 0..features {
                    grad[k] -= weight * sign * xi_star[k];
                }
                grad[features] -= weight * sign;
            }
        }
    }

    /// The full piecewise-affine loss in `ξ` induced by decision `x`.
    pub fn induced(&self, x: &[f64]) -> Result<PiecewiseAffineLoss> {
        check_dim(self.decision_dim(), x.len())?;
        PiecewiseAffineLoss::new((0..self.piece_count()).map(|j| self.piece(x, j)).collect())
    }
}

/// Finite-support probability law used by the brute-force oracles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution<A = f64> {
    atoms: Vec<A>,
    probs: Vec<f64>,
}

impl<A> DiscreteDistribution<A> {
    pub fn new(atoms: Vec<A>, probs: Vec<f64>) -> Result<Self> {
        check_dim(atoms.len(), probs.len())?;
        if atoms.is_empty() {
            return Err(Error::invalid("distribution needs at least one atom"));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOL.prob_sum {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { atoms, probs })
    }

    pub fn uniform(atoms: Vec<A>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn atoms(&self) -> &[A] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn expect(&self, mut f: impl FnMut(&A) -> f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.probs)
            .map(|(a, p)| if *p > 0.0 { p * f(a) } else { 0.0 })
            .sum()
    }
}

impl<A: Clone + PartialEq> DiscreteDistribution<A> {
    /// `(1 − ε)·self + ε·other` on the union of the two supports.
    pub fn mixture(&self, other: &Self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::invalid(format!("mixture weight {eps} outside [0, 1]")));
        }
        let (atoms, p, q) = align_supports(self, other);
        let probs = p.iter().zip(&q).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();
        Self::new(atoms, probs).or_else(|_| {
            // rounding only; renormalize
            let (atoms, p, q) = align_supports(self, other);
            let mut probs: Vec<f64> =
                p.iter().zip(&q).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();
            let s: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|v| *v /= s);
            Self::new(atoms, probs)
        })
    }
}

impl DiscreteDistribution<f64> {
    pub fn mean(&self) -> f64 {
        self.expect(|a| *a)
    }
}

/// Union of two supports (first-seen order), with zero-padded probabilities.
pub fn align_supports<A: Clone + PartialEq>(
    p: &DiscreteDistribution<A>,
    q: &DiscreteDistribution<A>,
) -> (Vec<A>, Vec<f64>, Vec<f64>) {
    let mut atoms: Vec<A> = Vec::with_capacity(p.len() + q.len());
    let mut pp = Vec::new();
    let mut qq = Vec::new();
    for (a, w) in p.atoms.iter().zip(&p.probs) {
        match atoms.iter().position(|b| b == a) {
            Some(k) => pp[k] += w,
            None => {
                atoms.push(a.clone());
                pp.push(*w);
                qq.push(0.0);
            }
        }
    }
    for (a, w) in q.atoms.iter().zip(&q.probs) {
        match atoms.iter().position(|b| b == a) {
            Some(k) => qq[k] += w,
            None => {
                atoms.push(a.clone());
                pp.push(0.0);
                qq.push(*w);
            }
        }
    }
    (atoms, pp, qq)
}

/// One point of an out-of-sample mean/SD frontier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub tolerance: f64,
    pub oos_mean: f64,
    pub oos_sd: f64,
    pub msd: f64,
    pub solve_seconds: f64,
}

impl FrontierPoint {
    pub fn new(tolerance: f64, oos_mean: f64, oos_sd: f64, solve_seconds: f64) -> Self {
        Self {
            tolerance,
            oos_mean,
            oos_sd,
            msd: msd(oos_mean, oos_sd),
            solve_seconds,
        }
    }
}

/// Mean–standard-deviation criterion `(μ + σ)/2`.
pub fn msd(mean: f64, sd: f64) -> f64 {
    0.5 * (mean + sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(d: usize) -> DMatrix<f64> {
        DMatrix::identity(d, d)
    }

    #[test]
    fn absolute_value_pieces() {
        let loss = PiecewiseAffineLoss::new(vec![
            AffinePiece {
                slope: vec![1.0, 0.0],
                offset: 0.0,
            },
            AffinePiece {
                slope: vec![-1.0, 0.0],
                offset: 0.0,
            },
        ])
        .unwrap();
        assert_eq!(evaluate_loss(&loss, &[2.0, 5.0]).unwrap(), 2.0);
        assert!(matches!(
            evaluate_loss(&loss, &[2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn newsvendor_holding_and_backorder() {
        let nv = DecisionLoss::newsvendor(3.0, 8.0, 1).unwrap();
        let induced = nv.induced(&[5.0]).unwrap();
        assert_eq!(evaluate_loss(&induced, &[3.0]).unwrap(), 6.0);
        assert_eq!(evaluate_loss(&induced, &[7.0]).unwrap(), 16.0);
        assert_eq!(nv.loss(&[5.0], &[3.0]), 6.0);
        assert_eq!(nv.loss(&[5.0], &[7.0]), 16.0);
    }

    #[test]
    fn newsvendor_dimension_cap() {
        assert!(DecisionLoss::newsvendor(3.0, 8.0, 20).is_ok());
        assert!(matches!(
            DecisionLoss::newsvendor(3.0, 8.0, 21),
            Err(Error::TooManyPieces { d: 21, .. })
        ));
    }

    #[test]
    fn ellipsoid_membership() {
        let e = BulkSet::ellipsoid(vec![0.0, 0.0], identity(2), 1.0).unwrap();
        assert!(bulk_contains(&e, &[0.0, 0.0]).unwrap());
        let s = 1.001 / 2f64.sqrt();
        assert!(!bulk_contains(&e, &[s, s]).unwrap());
        assert!(bulk_contains(&e, &[1.0]).is_err());
    }

    #[test]
    fn box_membership() {
        let b = BulkSet::boxed(vec![0.0, 0.0], vec![1.0, 2.0], 1.0).unwrap();
        assert!(bulk_contains(&b, &[0.5, 1.9]).unwrap());
        assert!(!bulk_contains(&b, &[0.5, 2.1]).unwrap());
    }

    #[test]
    fn product_validation_rejects_overlaps_and_nesting() {
        let e = BulkSet::ellipsoid(vec![0.0], identity(1), 1.0).unwrap();
        let overlap = BulkSet::product(vec![
            BulkBlock {
                indices: vec![0],
                set: e.clone(),
            },
            BulkBlock {
                indices: vec![0],
                set: e.clone(),
            },
        ]);
        assert!(overlap.is_err());
        let inner = BulkSet::product(vec![BulkBlock {
            indices: vec![0],
            set: e.clone(),
        }])
        .unwrap();
        let nested = BulkSet::product(vec![BulkBlock {
            indices: vec![0],
            set: inner,
        }]);
        assert!(nested.is_err());
    }

    #[test]
    fn ellipsoid_factor_must_be_lower_triangular_with_positive_diagonal() {
        let upper = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(BulkSet::ellipsoid(vec![0.0; 2], upper, 1.0).is_err());
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.0]);
        assert!(BulkSet::ellipsoid(vec![0.0; 2], singular, 1.0).is_err());
        assert!(BulkSet::ellipsoid(vec![0.0; 2], identity(2), -1.0).is_err());
    }

    #[test]
    fn lad_pieces_match_absolute_residual() {
        let lad = DecisionLoss::lad(2).unwrap();
        let x = [0.5, -1.0, 2.0];
        let xi = [1.0, 3.0, 0.25];
        let direct = lad.loss(&x, &xi);
        let induced = lad.induced(&x).unwrap().eval(&xi);
        assert!((direct - induced).abs() < 1e-14);
        assert!((direct - (0.25f64 - 0.5 + 3.0 - 2.0).abs()).abs() < 1e-14);
    }

    #[test]
    fn distribution_rejects_bad_probabilities() {
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![-0.1, 1.1]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 2.0], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn mixture_unions_supports() {
        let p = DiscreteDistribution::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let r = DiscreteDistribution::new(vec![3.0], vec![1.0]).unwrap();
        let m = p.mixture(&r, 0.2).unwrap();
        assert_eq!(m.atoms(), &[1.0, 2.0, 3.0]);
        assert!((m.probs()[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn frontier_point_msd() {
        let p = FrontierPoint::new(0.1, 40.0, 12.0, 0.0);
        assert_eq!(p.msd, 26.0);
    }

    #[test]
    fn bulk_json_round_trip() {
        let e = BulkSet::ellipsoid(vec![1.0, 2.0], identity(2), 1.5).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"kind\":\"ellipsoid\""));
        let back: BulkSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }
}
