//! Revised simplex for the cutting-plane model over a box.
//!
//! The model `min_{x ∈ [lo, hi]} max_k (a_k + g_kᵀx)` is solved through its
//! dual. With `y = x − lo`, `h = hi − lo` and `c_k = a_k + g_kᵀlo`:
//!
//! ```text
//! max  Σ_k c_k λ_k − Σ_i h_i μ_i
//! s.t. Σ_k λ_k = 1
//!      Σ_k g_ki λ_k + μ_i − σ_i = 0     (i = 1..n)
//!      λ, μ, σ ≥ 0
//! ```
//!
//! The right-hand side never changes, so a basis stays primal feasible when
//! cuts are appended (new columns) or the box moves (new costs). Each solve
//! warm-starts from the previous basis. The primal point is read off the
//! simplex multipliers: `z = π₀`, `y_i = −π_i`.

use nalgebra::DMatrix;

use crate::tolerances::TOL;

/// Accumulated affine minorants `a_k + g_kᵀx`.
#[derive(Clone, Debug, Default)]
pub(crate) struct Cuts {
    n: usize,
    intercept: Vec<f64>,
    grads: Vec<f64>,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl Cuts {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.intercept.len()
    }

    pub fn grad(&self, k: usize) -> &[f64] {
        &self.grads[k * self.n..(k + 1) * self.n]
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.n..(k + 1) * self.n]
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn push(&mut self, x: &[f64], f: f64, g: &[f64]) {
        let gx: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        self.intercept.push(f - gx);
        self.grads.extend_from_slice(g);
        self.points.extend_from_slice(x);
        self.values.push(f);
    }

    /// Value of cut `k` at `x`, written around its own point so large
    /// intercepts do not cancel.
    pub fn cut_at(&self, k: usize, x: &[f64]) -> f64 {
        let p = self.point(k);
        self.values[k]
            + self
                .grad(k)
                .iter()
                .zip(x.iter().zip(p))
                .map(|(g, (a, b))| g * (a - b))
                .sum::<f64>()
    }

    pub fn model(&self, x: &[f64]) -> f64 {
        (0..self.len()).map(|k| self.cut_at(k, x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    /// Model value at `x`, evaluated directly from the cuts.
    pub model_value: f64,
    /// Weak-duality lower bound on the model minimum over the box, valid
    /// even if the simplex stopped early.
    pub lower_bound: f64,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct CutLp {
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    since_reinvert: usize,
}

const REINVERT_EVERY: usize = 50;
const BLAND_AFTER: usize = 20;

impl CutLp {
    pub fn new() -> Self {
        Self::default()
    }

    fn column(cuts: &Cuts, j: usize, out: &mut [f64]) {
        let n = cuts.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < n {
            out[j + 1] = 1.0;
        } else if j < 2 * n {
            out[j - n + 1] = -1.0;
        } else {
            out[0] = 1.0;
            out[1..].copy_from_slice(cuts.grad(j - 2 * n));
        }
    }

    fn cost(cuts: &Cuts, j: usize, lo: &[f64], h: &[f64]) -> f64 {
        let n = cuts.n;
        if j < n {
            -h[j]
        } else if j < 2 * n {
            0.0
        } else {
            let k = j - 2 * n;
            cuts.intercept[k] + cuts.grad(k).iter().zip(lo).map(|(g, l)| g * l).sum::<f64>()
        }
    }

    /// Basis made of one cut and a μ or σ per coordinate, chosen by the sign
    /// of the cut's gradient so every basic variable is nonnegative.
    fn initial_basis(&mut self, cuts: &Cuts, k: usize) {
        let n = cuts.n;
        let g = cuts.grad(k);
        self.basis = std::iter::once(2 * n + k)
            .chain((0..n).map(|i| if g[i] >= 0.0 { n + i } else { i }))
            .collect();
        self.reinvert(cuts);
    }

    fn reinvert(&mut self, cuts: &Cuts) -> bool {
        let m = cuts.n + 1;
        let mut b = DMatrix::<f64>::zeros(m, m);
        let mut col = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            Self::column(cuts, j, &mut col);
            for i in 0..m {
                b[(i, r)] = col[i];
            }
        }
        self.since_reinvert = 0;
        match b.try_inverse() {
            Some(inv) => {
                self.binv = inv;
                true
            }
            None => false,
        }
    }

    pub fn solve(&mut self, cuts: &Cuts, lo: &[f64], hi: &[f64]) -> LpSolution {
        let n = cuts.n;
        let m = n + 1;
        let ncols = 2 * n + cuts.len();
        let h: Vec<f64> = hi.iter().zip(lo).map(|(a, b)| a - b).collect();
        if self.basis.len() != m {
            self.initial_basis(cuts, cuts.len() - 1);
        } else if self.since_reinvert >= REINVERT_EVERY && !self.reinvert(cuts) {
            self.initial_basis(cuts, cuts.len() - 1);
        }

        let costs: Vec<f64> = (0..ncols).map(|j| Self::cost(cuts, j, lo, &h)).collect();
        let cscale = 1.0 + costs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let rc_tol = TOL.simplex * cscale;
        let mut is_basic = vec![false; ncols];
        for &j in &self.basis {
            is_basic[j] = true;
        }

        let mut col = vec![0.0; m];
        let mut dcol = vec![0.0; m];
        let mut pi = vec![0.0; m];
        let mut degenerate = 0usize;
        let max_pivots = 50 * (m + cuts.len()) + 200;
        for _ in 0..max_pivots {
            if self.since_reinvert >= REINVERT_EVERY && !self.reinvert(cuts) {
                self.initial_basis(cuts, cuts.len() - 1);
                is_basic.iter_mut().for_each(|b| *b = false);
                for &j in &self.basis {
                    is_basic[j] = true;
                }
            }
            // π = c_Bᵀ B⁻¹
            for (c, p) in pi.iter_mut().enumerate() {
                *p = (0..m).map(|r| costs[self.basis[r]] * self.binv[(r, c)]).sum();
            }
            let bland = degenerate > BLAND_AFTER;
            let mut entering = None;
            let mut best = rc_tol;
            for j in 0..ncols {
                if is_basic[j] {
                    continue;
                }
                let rc = if j < n {
                    costs[j] - pi[j + 1]
                } else if j < 2 * n {
                    pi[j - n + 1]
                } else {
                    let g = cuts.grad(j - 2 * n);
                    costs[j] - pi[0] - g.iter().zip(&pi[1..]).map(|(a, b)| a * b).sum::<f64>()
                };
                if rc > best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(j) = entering else { break };

            Self::column(cuts, j, &mut col);
            for (r, d) in dcol.iter_mut().enumerate() {
                *d = (0..m).map(|c| self.binv[(r, c)] * col[c]).sum();
            }
            let dmax = dcol.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let piv_tol = 1e-9 * dmax.max(1.0);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                if dcol[r] > piv_tol {
                    let t = self.binv[(r, 0)].max(0.0) / dcol[r];
                    let better = match leave {
                        None => true,
                        Some((lr, lt)) => {
                            if t < lt - 1e-15 {
                                true
                            } else if t <= lt + 1e-15 {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    dcol[r] > dcol[lr]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, t));
                    }
                }
            }
            // the dual is bounded, so a missing pivot row is numerical noise
            let Some((r, t)) = leave else { break };
            degenerate = if t <= 1e-14 { degenerate + 1 } else { 0 };

            let p = dcol[r];
            for c in 0..m {
                self.binv[(r, c)] /= p;
            }
            for i in 0..m {
                if i != r && dcol[i] != 0.0 {
                    let f = dcol[i];
                    for c in 0..m {
                        let v = self.binv[(r, c)];
                        self.binv[(i, c)] -= f * v;
                    }
                }
            }
            is_basic[self.basis[r]] = false;
            is_basic[j] = true;
            self.basis[r] = j;
            self.since_reinvert += 1;
        }

        for (c, p) in pi.iter_mut().enumerate() {
            *p = (0..m).map(|r| costs[self.basis[r]] * self.binv[(r, c)]).sum();
        }
        let x: Vec<f64> = (0..n)
            .map(|i| lo[i] + (-pi[i + 1]).clamp(0.0, h[i]))
            .collect();

        // any point of the simplex gives a dual-feasible (λ, μ, σ)
        let mut lambda = vec![0.0; cuts.len()];
        for (r, &j) in self.basis.iter().enumerate() {
            if j >= 2 * n {
                lambda[j - 2 * n] = self.binv[(r, 0)].max(0.0);
            }
        }
        let total: f64 = lambda.iter().sum();
        let lower_bound = if total > 0.0 {
            let mut s = vec![0.0; n];
            let mut val = 0.0;
            for (k, l) in lambda.iter().enumerate() {
                if *l > 0.0 {
                    let w = l / total;
                    val += w * costs[2 * n + k];
                    for (si, g) in s.iter_mut().zip(cuts.grad(k)) {
                        *si += w * g;
                    }
                }
            }
            val - s.iter().zip(&h).map(|(si, hi)| hi * (-si).max(0.0)).sum::<f64>()
        } else {
            f64::NEG_INFINITY
        };
        let model_value = cuts.model(&x);
        LpSolution {
            x,
            model_value,
            lower_bound: lower_bound.min(model_value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_model_min(cuts: &Cuts, lo: &[f64], hi: &[f64], steps: usize) -> f64 {
        // grid over a 2-d box
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64,
                ];
                best = best.min(cuts.model(&x));
            }
        }
        best
    }

    #[test]
    fn absolute_value_model() {
        let mut cuts = Cuts::new(1);
        cuts.push(&[5.0], 2.0, &[1.0]);
        cuts.push(&[0.0], 3.0, &[-1.0]);
        let mut lp = CutLp::new();
        let s = lp.solve(&cuts, &[-10.0], &[10.0]);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!(s.model_value.abs() < 1e-12);
        assert!(s.lower_bound.abs() < 1e-12);
    }

    #[test]
    fn matches_grid_on_random_models() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..50 {
            let mut cuts = Cuts::new(2);
            let mut lp = CutLp::new();
            let lo = [-1.0 - next().abs(), -1.0 - next().abs()];
            let hi = [1.0 + next().abs(), 1.0 + next().abs()];
            for _ in 0..8 {
                let x = [next() * 2.0, next() * 2.0];
                cuts.push(&x, next(), &[next() * 3.0, next() * 3.0]);
                let s = lp.solve(&cuts, &lo, &hi);
                let grid = brute_model_min(&cuts, &lo, &hi, 400);
                assert!(s.model_value <= grid + 1e-9, "{} > {grid}", s.model_value);
                assert!(s.lower_bound <= s.model_value + 1e-12);
                assert!((s.lower_bound - s.model_value).abs() < 1e-9);
            }
        }
    }
}
