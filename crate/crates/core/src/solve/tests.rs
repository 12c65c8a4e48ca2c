use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::*;
use crate::model::BulkSet;
use crate::rng::{stream, Rng};
use crate::worstcase::cvar_uniform;

struct AbsShift(f64);

impl ObjectiveOracle for AbsShift {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = x[0] - self.0;
        grad[0] = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        r.abs()
    }
}

struct SupOnly {
    loss: DecisionLoss,
    bulk: BulkSet,
}

impl ObjectiveOracle for SupOnly {
    fn dim(&self) -> usize {
        self.loss.decision_dim()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (v, j, xi) = loss_sup(&self.loss, &self.bulk, x);
        self.loss.add_piece_gradient(j, &xi, 1.0, grad);
        v
    }
}

fn matrix(rng: &mut Rng, n: usize, d: usize, scale: f64, shift: f64) -> OutcomeMatrix {
    let v: Vec<f64> = (0..n * d)
        .map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    OutcomeMatrix::new(n, d, v).unwrap()
}

fn regression_data(rng: &mut Rng, n: usize, p: usize, noise: f64) -> OutcomeMatrix {
    let w: Vec<f64> = (0..p).map(|k| 1.0 + k as f64).collect();
    let mut v = Vec::with_capacity(n * (p + 1));
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let y = 2.0 + crate::linalg::dot(&w, &x) + noise * rng.sample::<f64, _>(StandardNormal);
        v.extend(x);
        v.push(y);
    }
    OutcomeMatrix::new(n, p + 1, v).unwrap()
}

fn ellipsoid_bulk(d: usize, center: f64, scale: f64, radius: f64) -> BulkSet {
    let mut l = DMatrix::<f64>::identity(d, d) * scale;
    for i in 1..d {
        l[(i, i - 1)] = 0.3 * scale;
    }
    BulkSet::ellipsoid(vec![center; d], l, radius).unwrap()
}

fn in_bulk(m: &OutcomeMatrix, bulk: &BulkSet) -> OutcomeMatrix {
    let idx: Vec<usize> = (0..m.n_rows()).filter(|&i| bulk.contains(m.row(i))).collect();
    m.select_rows(&idx).unwrap()
}

fn random_point(rng: &mut Rng, oracle: &dyn ObjectiveOracle, scale: f64) -> Vec<f64> {
    let domain = oracle.domain();
    (0..oracle.dim())
        .map(|i| {
            let v = scale * rng.sample::<f64, _>(StandardNormal);
            if domain.nonnegative(i) {
                v.abs()
            } else {
                v
            }
        })
        .collect()
}

fn check_subgradients(oracle: &dyn ObjectiveOracle, center: &[f64], scale: f64, seed: u64) {
    let mut rng = stream(seed, 0);
    let mut g = vec![0.0; oracle.dim()];
    for _ in 0..500 {
        let x: Vec<f64> = random_point(&mut rng, oracle, scale)
            .iter()
            .zip(center)
            .map(|(a, c)| a + c)
            .collect();
        let y: Vec<f64> = random_point(&mut rng, oracle, scale)
            .iter()
            .zip(center)
            .map(|(a, c)| a + c)
            .collect();
        let fx = oracle.eval(&x, &mut g);
        let fy = oracle.value(&y);
        let lin: f64 = g.iter().zip(y.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum();
        assert!(fy >= fx + lin - 1e-8 * (1.0 + fx.abs() + fy.abs()), "f(y)={fy} < {fx} + {lin}");
    }
}

#[test]
fn abs_value_minimum() {
    let r = minimize(&AbsShift(3.0), &[0.0], &SolveOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.minimizer[0] - 3.0).abs() < 1e-6, "{:?}", r);
    assert!(r.certified_gap.unwrap() >= 0.0);
}

#[test]
fn far_minimum_grows_box() {
    let r = minimize(&AbsShift(1e4), &[0.0], &SolveOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.minimizer[0] - 1e4).abs() < 1e-2, "{:?}", r);
}

#[test]
fn subgradient_fallback_is_uncertified() {
    let opts = SolveOptions {
        method: Method::Subgradient,
        max_iters: 2000,
        ..SolveOptions::default()
    };
    let r = minimize(&AbsShift(3.0), &[0.0], &opts).unwrap();
    assert_eq!(r.certified_gap, None);
    assert!((r.minimizer[0] - 3.0).abs() < 0.05);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["certified_gap"], "uncertified");
    let back: SolveReport = serde_json::from_value(json).unwrap();
    assert_eq!(back, r);
}

#[test]
fn rejects_start_outside_domain() {
    let loss = DecisionLoss::newsvendor(3.0, 8.0, 1).unwrap();
    let obj = build_saa_objective(loss, OutcomeMatrix::from_rows(&[vec![1.0]]).unwrap()).unwrap();
    assert!(minimize(&obj, &[-1.0], &SolveOptions::default()).is_err());
}

#[test]
fn newsvendor_saa_order_statistic() {
    let loss = DecisionLoss::newsvendor(3.0, 8.0, 1).unwrap();
    let rows: Vec<Vec<f64>> = (1..=11).map(|v| vec![v as f64]).collect();
    let obj = build_saa_objective(loss, OutcomeMatrix::from_rows(&rows).unwrap()).unwrap();
    let r = minimize_default(&obj, &SolveOptions::default()).unwrap();
    // 11·8/11 is an integer, so the SAA cost is flat between the 8th and 9th
    // order statistics; the smallest minimizer is the 8th
    assert!(r.minimizer[0] >= 8.0 - 1e-6 && r.minimizer[0] <= 9.0 + 1e-6, "{:?}", r);
    assert!((r.objective - obj.value(&[8.0])).abs() < 1e-9);
    // grid-search oracle, first minimizer
    let grid: Vec<f64> = (0..=1200).map(|k| k as f64 * 0.01).collect();
    let min = grid.iter().map(|x| obj.value(&[*x])).fold(f64::INFINITY, f64::min);
    let best = grid.iter().find(|x| obj.value(&[**x]) <= min + 1e-9).unwrap();
    assert!((best - 8.0).abs() < 1e-9);
}

#[test]
fn lv_interval_bulk_full_tolerance() {
    let (h, b, alpha, beta) = (3.0, 8.0, 2.0, 12.0);
    let loss = DecisionLoss::newsvendor(h, b, 1).unwrap();
    let bulk = BulkSet::boxed(vec![(alpha + beta) / 2.0], vec![(beta - alpha) / 2.0], 1.0).unwrap();
    let samples = OutcomeMatrix::from_rows(&[vec![5.0]]).unwrap();
    let obj = build_lv_objective(loss, samples, bulk, 1.0).unwrap();
    let r = minimize_default(&obj, &SolveOptions::default()).unwrap();
    let x_star = (b * beta + h * alpha) / (h + b);
    let v_star = h * b * (beta - alpha) / (h + b);
    assert!((r.minimizer[0] - x_star).abs() < 1e-5, "{:?}", r);
    assert!((r.objective - v_star).abs() < 1e-5 * v_star);
    let grid = (0..=20000)
        .map(|k| obj.value(&[k as f64 * 0.001]))
        .fold(f64::INFINITY, f64::min);
    assert!((grid - v_star).abs() < 1e-2);
}

#[test]
fn lv_mean_and_sup_reproduce_value() {
    let mut rng = stream(11, 0);
    let d = 3;
    let bulk = ellipsoid_bulk(d, 30.0, 10.0, 2.0);
    let samples = in_bulk(&matrix(&mut rng, 400, d, 10.0, 30.0), &bulk);
    let loss = DecisionLoss::newsvendor(3.0, 8.0, d).unwrap();
    let obj = build_lv_objective(loss, samples, bulk, 0.5).unwrap();
    let r = minimize_default(&obj, &SolveOptions::default()).unwrap();
    let x = &r.minimizer;
    let v = 0.5 * obj.mean(x) + 0.5 * obj.sup(x);
    assert!((v - obj.value(x)).abs() < 1e-10);
    assert!((v - r.objective).abs() < 1e-10);
}

#[test]
fn lv_endpoints() {
    let mut rng = stream(12, 0);
    for trial in 0..5 {
        let d = 1 + trial % 3;
        let bulk = ellipsoid_bulk(d, 20.0, 5.0, 2.0);
        let samples = in_bulk(&matrix(&mut rng, 200, d, 5.0, 20.0), &bulk);
        let loss = DecisionLoss::newsvendor(2.0, 5.0, d).unwrap();
        let lv0 = build_lv_objective(loss, samples.clone(), bulk.clone(), 0.0).unwrap();
        let saa = build_saa_objective(loss, samples.clone()).unwrap();
        for _ in 0..20 {
            let x = random_point(&mut rng, &lv0, 20.0);
            assert!((lv0.value(&x) - saa.value(&x)).abs() < 1e-8 * (1.0 + saa.value(&x)));
        }
        // ε = 1: minimized sup, against the closed-form sup solved on its own
        let lv1 = build_lv_objective(loss, samples.clone(), bulk.clone(), 1.0).unwrap();
        let sup_only = SupOnly { loss, bulk: bulk.clone() };
        let opts = SolveOptions::with_tol(1e-10);
        let a = minimize_default(&lv1, &opts).unwrap();
        let b = minimize(&sup_only, &a.minimizer.iter().map(|v| v + 1.0).collect::<Vec<_>>(), &opts).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-8 * (1.0 + a.objective.abs()));
        assert!((a.objective - lv1.sup(&a.minimizer)).abs() < 1e-12 * (1.0 + a.objective));
    }
}

#[test]
fn lv_subgradients_valid() {
    let mut rng = stream(13, 0);
    let bulk = ellipsoid_bulk(3, 30.0, 10.0, 2.5);
    let samples = in_bulk(&matrix(&mut rng, 300, 3, 10.0, 30.0), &bulk);
    for eps in [0.0, 0.3, 1.0] {
        let obj = build_lv_objective(DecisionLoss::newsvendor(3.0, 8.0, 3).unwrap(), samples.clone(), bulk.clone(), eps)
            .unwrap();
        check_subgradients(&obj, &[30.0; 3], 15.0, 1);
    }
    let data = regression_data(&mut rng, 300, 2, 0.5);
    let bulk = BulkSet::boxed(vec![0.0, 0.0, 2.0], vec![1.0, 1.0, 3.0], 2.5).unwrap();
    let samples = in_bulk(&data, &bulk);
    let obj = build_lv_objective(DecisionLoss::lad(2).unwrap(), samples, bulk, 0.4).unwrap();
    check_subgradients(&obj, &[0.0; 3], 3.0, 2);
}

#[test]
fn other_subgradients_valid() {
    let mut rng = stream(14, 0);
    let demand = matrix(&mut rng, 100, 2, 5.0, 20.0);
    let nv = DecisionLoss::newsvendor(3.0, 8.0, 2).unwrap();
    check_subgradients(&build_saa_objective(nv, demand.clone()).unwrap(), &[20.0, 20.0], 10.0, 3);
    check_subgradients(&build_cvar_objective(nv, demand.clone(), 0.1).unwrap(), &[20.0, 20.0, 30.0], 10.0, 4);
    for eps in [0.0, 0.05, 0.5, 10.0] {
        check_subgradients(&build_kl_objective(nv, demand.clone(), eps).unwrap(), &[20.0, 20.0], 10.0, 5);
    }
    let draws: Vec<OutcomeMatrix> = (0..4).map(|_| matrix(&mut rng, 25, 2, 5.0, 20.0)).collect();
    check_subgradients(&build_kl_bdro_objective(nv, draws, 0.3).unwrap(), &[20.0, 20.0], 10.0, 6);
    let data = regression_data(&mut rng, 200, 3, 1.0);
    check_subgradients(&build_wasserstein_lad_objective(data.clone(), 0.5, 1.0).unwrap(), &[0.0; 4], 3.0, 7);
    check_subgradients(&build_ridge_objective(data.clone(), 0.1).unwrap(), &[0.0; 4], 3.0, 8);
    check_subgradients(&build_cvar_objective(DecisionLoss::lad(3).unwrap(), data, 0.2).unwrap(), &[0.0; 5], 3.0, 9);
}

#[test]
fn cvar_inner_optimum_matches_cvar() {
    let loss = DecisionLoss::newsvendor(1.0, 1.0, 1).unwrap();
    // losses at x = 0 are the demands themselves
    let demand = OutcomeMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
    let obj = build_cvar_objective(loss, demand, 0.5).unwrap();
    let inner = [1.0, 2.0, 3.0, 4.0]
        .iter()
        .map(|&t| obj.value_at(&[0.0], t))
        .fold(f64::INFINITY, f64::min);
    assert!((inner - 3.5).abs() < 1e-12);

    let constant = OutcomeMatrix::from_rows(&vec![vec![7.0]; 5]).unwrap();
    let obj = build_cvar_objective(loss, constant, 0.3).unwrap();
    assert!((obj.value_at(&[0.0], 7.0) - 7.0).abs() < 1e-12);

    let mut rng = stream(15, 0);
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..10.0)]).collect();
        let losses: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let eps = rng.random_range(0.01..1.0);
        let obj = build_cvar_objective(loss, OutcomeMatrix::from_rows(&rows).unwrap(), eps).unwrap();
        // the objective is piecewise linear in τ with kinks at the losses
        let inner = losses
            .iter()
            .map(|&t| obj.value_at(&[0.0], t))
            .fold(f64::INFINITY, f64::min);
        let reference = cvar_uniform(&losses, eps).unwrap();
        assert!((inner - reference).abs() < 1e-10, "{inner} vs {reference}");
    }
}

#[test]
fn cvar_near_one_is_mean() {
    let loss = DecisionLoss::newsvendor(1.0, 1.0, 1).unwrap();
    let rows: Vec<Vec<f64>> = (0..10).map(|v| vec![v as f64]).collect();
    let obj = build_cvar_objective(loss, OutcomeMatrix::from_rows(&rows).unwrap(), 0.999).unwrap();
    let inner = (0..10)
        .map(|t| obj.value_at(&[0.0], t as f64))
        .fold(f64::INFINITY, f64::min);
    // tail 0.999 drops 0.001 of the lowest atom
    assert!((inner - 4.5).abs() < 1e-2);
    assert!(build_cvar_objective(loss, OutcomeMatrix::from_rows(&rows).unwrap(), 0.0).is_err());
}

#[test]
fn cvar_solve_matches_order_statistics() {
    // minimizing CVaR of newsvendor cost over (x, τ) agrees with a grid over x
    let loss = DecisionLoss::newsvendor(3.0, 8.0, 1).unwrap();
    let rows: Vec<Vec<f64>> = (1..=20).map(|v| vec![v as f64]).collect();
    let obj = build_cvar_objective(loss, OutcomeMatrix::from_rows(&rows).unwrap(), 0.2).unwrap();
    let r = minimize_default(&obj, &SolveOptions::with_tol(1e-9)).unwrap();
    let grid = (0..=2500)
        .map(|k| {
            let x = k as f64 * 0.01;
            let losses: Vec<f64> = (1..=20).map(|v| loss.loss(&[x], &[v as f64])).collect();
            cvar_uniform(&losses, 0.2).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(r.objective <= grid + 1e-6 && r.objective >= grid - 0.05, "{} vs {grid}", r.objective);
}

#[test]
fn kl_objective_endpoints() {
    let mut rng = stream(16, 0);
    let nv = DecisionLoss::newsvendor(3.0, 8.0, 2).unwrap();
    let draw = matrix(&mut rng, 30, 2, 5.0, 20.0);
    let single = build_kl_objective(nv, draw.clone(), 0.4).unwrap();
    let repeated = build_kl_bdro_objective(nv, vec![draw.clone(); 3], 0.4).unwrap();
    let x = [18.0, 22.0];
    assert!((single.value(&x) - repeated.value(&x)).abs() < 1e-12);

    let draws: Vec<OutcomeMatrix> = (0..3).map(|_| matrix(&mut rng, 30, 2, 5.0, 20.0)).collect();
    let sat = build_kl_bdro_objective(nv, draws.clone(), 30f64.ln() + 0.01).unwrap();
    let expected: f64 = draws
        .iter()
        .map(|d| d.rows().map(|xi| nv.loss(&x, xi)).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / 3.0;
    assert!((sat.value(&x) - expected).abs() < 1e-9);
}

#[test]
fn kl_solve_between_mean_and_max() {
    let mut rng = stream(17, 0);
    let nv = DecisionLoss::newsvendor(3.0, 8.0, 2).unwrap();
    let draw = matrix(&mut rng, 50, 2, 5.0, 20.0);
    let mut last = f64::NEG_INFINITY;
    for eps in [0.0, 0.05, 0.2, 1.0, 5.0] {
        let obj = build_kl_objective(nv, draw.clone(), eps).unwrap();
        let r = minimize_default(&obj, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.objective >= last - 1e-5 * (1.0 + last.abs()));
        last = r.objective;
    }
}

#[test]
fn wasserstein_properties() {
    let mut rng = stream(18, 0);
    let data = regression_data(&mut rng, 101, 2, 1.0);
    let lad = build_saa_objective(DecisionLoss::lad(2).unwrap(), data.clone()).unwrap();
    let w0 = build_wasserstein_lad_objective(data.clone(), 0.0, 1.0).unwrap();
    for _ in 0..20 {
        let x = random_point(&mut rng, &lad, 3.0);
        assert!((lad.value(&x) - w0.value(&x)).abs() < 1e-12);
    }
    // w = 0: mean |y − b₀| + ρσ, minimized at the median
    let rho = 0.7;
    let obj = build_wasserstein_lad_objective(data.clone(), rho, 2.0).unwrap();
    let mut y = data.column(2);
    y.sort_by(f64::total_cmp);
    let median = y[50];
    let at = |b: f64| obj.value(&[0.0, 0.0, b]);
    assert!((at(median) - (y.iter().map(|v| (v - median).abs()).sum::<f64>() / 101.0 + rho * 2.0)).abs() < 1e-12);
    for db in [-0.1, -1e-3, 1e-3, 0.1] {
        assert!(at(median + db) >= at(median));
    }
    // regularization path
    let mut last = f64::INFINITY;
    let mut first = None;
    for rho in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
        let obj = build_wasserstein_lad_objective(data.clone(), rho, 1.0).unwrap();
        let r = minimize_default(&obj, &SolveOptions::with_tol(1e-9)).unwrap();
        let n = slope_norm(&r.minimizer);
        assert!(n <= last + 1e-4, "rho {rho}: {n} > {last}");
        first.get_or_insert(n);
        last = n;
    }
    assert!(last < 0.5 * first.unwrap());
}

#[test]
fn ridge_closed_form() {
    let mut rng = stream(19, 0);
    let data = regression_data(&mut rng, 200, 3, 0.5);
    for lambda in [0.0, 0.01, 1.0] {
        let obj = build_ridge_objective(data.clone(), lambda).unwrap();
        let a = obj.solve_closed_form().unwrap();
        let b = obj.solve_iterative(1e-14, 1000).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8, "{a:?} vs {b:?}");
        }
        // stationarity
        let mut g = vec![0.0; 4];
        obj.eval(&a, &mut g);
        assert!(crate::linalg::norm2(&g) < 1e-9);
    }
    let big = build_ridge_objective(data.clone(), 1e9).unwrap().solve_closed_form().unwrap();
    let ybar = data.column(3).iter().sum::<f64>() / 200.0;
    assert!(big[..3].iter().all(|w| w.abs() < 1e-6));
    assert!((big[3] - ybar).abs() < 1e-6);

    let exact = regression_data(&mut rng, 50, 3, 0.0);
    let fit = build_ridge_objective(exact.clone(), 0.0).unwrap();
    let x = fit.solve_closed_form().unwrap();
    assert!(fit.value(&x) < 1e-20);

    let collinear = OutcomeMatrix::from_rows(&(0..10).map(|i| vec![i as f64, 2.0 * i as f64, 1.0]).collect::<Vec<_>>())
        .unwrap();
    assert!(build_ridge_objective(collinear, 0.0).unwrap().solve_closed_form().is_err());
}

/// Direction-set descent with exact line searches, used as an independent
/// reference minimizer.
fn pattern_descent(oracle: &dyn ObjectiveOracle, x0: &[f64], seed: u64) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut rng = stream(seed, 0);
    let mut x = x0.to_vec();
    let mut fx = oracle.value(&x);
    let domain = oracle.domain();
    let mut step = 10.0;
    for _ in 0..4000 {
        let mut dir: Vec<f64> = if rng.random_bool(0.5) {
            let mut e = vec![0.0; n];
            e[rng.random_range(0..n)] = 1.0;
            e
        } else {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        };
        let nd = crate::linalg::norm2(&dir);
        dir.iter_mut().for_each(|v| *v /= nd);
        let f = |t: f64| {
            let y: Vec<f64> = x
                .iter()
                .zip(&dir)
                .enumerate()
                .map(|(i, (a, d))| if domain.nonnegative(i) { (a + t * d).max(0.0) } else { a + t * d })
                .collect();
            (oracle.value(&y), y)
        };
        // golden section on [−step, step]
        let (mut a, mut b) = (-step, step);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c).0 <= f(d).0 {
                b = d;
            } else {
                a = c;
            }
        }
        let (fy, y) = f(0.5 * (a + b));
        if fy < fx {
            fx = fy;
            x = y;
        }
        step = (step * 0.999).max(1e-3);
    }
    (x, fx)
}

#[test]
fn newsvendor_lv_matches_reference_descent() {
    let mut rng = stream(20, 0);
    let d = 5;
    let bulk = ellipsoid_bulk(d, 30.0, 10.0, 2.5);
    let mut samples = in_bulk(&matrix(&mut rng, 4000, d, 10.0, 30.0), &bulk);
    samples = samples.select_rows(&(0..1250).collect::<Vec<_>>()).unwrap();
    let obj = build_lv_objective(DecisionLoss::newsvendor(3.0, 8.0, d).unwrap(), samples, bulk, 0.25).unwrap();
    let r = minimize_default(&obj, &SolveOptions::default()).unwrap();
    assert!(r.converged);
    let (_, reference) = pattern_descent(&obj, &obj.initial_point(), 3);
    assert!(
        (r.objective - reference).abs() <= 1e-3 * reference.abs(),
        "{} vs {reference}",
        r.objective
    );
    assert!(r.objective <= reference + 1e-9 * reference.abs());
}

#[test]
fn problem_spec_round_trip() {
    let json = r#"{
        "objective": {"kind": "saa",
                      "loss": {"kind": "newsvendor", "holding": 3.0, "backorder": 8.0, "dim": 1},
                      "samples": [[1],[2],[3],[4],[5],[6],[7],[8],[9],[10],[11]]},
        "options": {"tol": 1e-8}
    }"#;
    let spec: ProblemSpec = serde_json::from_str(json).unwrap();
    let r = spec.solve().unwrap();
    assert!((r.objective - 12.0).abs() < 1e-9 && r.minimizer[0] >= 8.0 - 1e-6 && r.minimizer[0] <= 9.0 + 1e-6);
    let again: ProblemSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(again, spec);

    let ridge = r#"{"objective": {"kind": "ridge", "data": [[0,1],[1,3],[2,5.5]], "lambda": 0.0},
                   "options": {"method": "closed_form"}}"#;
    let r = serde_json::from_str::<ProblemSpec>(ridge).unwrap().solve().unwrap();
    assert_eq!(r.method, Method::ClosedForm);
}
