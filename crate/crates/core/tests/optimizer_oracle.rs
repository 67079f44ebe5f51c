mod support;

use pathsift::logistic::{self, LogisticConfig, SparseMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::Instance;

fn design(inst: &Instance) -> SparseMatrix<f64> {
    let mut m = SparseMatrix::new(inst.rows[0].len());
    for r in &inst.rows {
        m.push_row(r.iter().copied().enumerate().filter(|(_, v)| *v != 0.0));
    }
    m
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.gen_range(1..8);
        let inst = Instance::random(seed, rng.gen_range(5..60), d);
        let x = design(&inst);
        let l2 = [0.0, 0.01, 0.1, 1.0][seed as usize % 4];
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let (f, gw, gb) = logistic::objective_and_gradient(&x, &inst.labels, l2, &w, b);
        assert!((f - inst.objective(l2, &w, b)).abs() < 1e-12);

        let mut analytic = gw.clone();
        analytic.push(gb);
        let mut numeric = Vec::new();
        for j in 0..=d {
            let shifted = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < d { w2[j] += delta } else { b2 += delta }
                inst.objective(l2, &w2, b2)
            };
            numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
        }
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-8);
        assert!(rel < 1e-6, "instance {seed}: relative error {rel:e}");
    }
}

#[test]
fn final_objective_matches_newton_reference() {
    for seed in 0..10 {
        let inst = Instance::random(100 + seed, 40 + 10 * seed as usize, 3 + seed as usize % 4);
        let x = design(&inst);
        let l2 = [0.01, 0.1, 1.0][seed as usize % 3];
        let cfg = LogisticConfig { l2, max_iters: 200_000, tolerance: 1e-7 };
        let fit = logistic::fit::<f64, _>(&x, &inst.labels, &cfg).unwrap();
        let (w_ref, b_ref, f_ref) = inst.newton(l2);
        assert!(fit.converged, "instance {seed} did not converge");
        assert!((fit.objective - f_ref).abs() < 1e-8, "instance {seed}: {} vs {f_ref}", fit.objective);
        for (a, r) in fit.weights.iter().zip(&w_ref) {
            assert!((a - r).abs() < 1e-5);
        }
        assert!((fit.bias - b_ref).abs() < 1e-5);
    }
}

#[test]
fn stronger_regularization_never_grows_the_weights() {
    let grid = [0.0001, 0.001, 0.01, 0.1, 1.0, 10.0];
    for seed in 0..20 {
        let inst = Instance::random(300 + seed, 60, 5);
        let x = design(&inst);
        let mut last_norm = f64::INFINITY;
        let mut last_nll = -f64::INFINITY;
        for &l2 in &grid {
            let cfg = LogisticConfig { l2, max_iters: 200_000, tolerance: 1e-7 };
            let fit = logistic::fit::<f64, _>(&x, &inst.labels, &cfg).unwrap();
            let n = norm(&fit.weights);
            let nll = inst.objective(0.0, &fit.weights, fit.bias);
            assert!(n <= last_norm + 1e-7, "instance {seed}, l2 {l2}: ‖w‖ {n} > {last_norm}");
            assert!(nll >= last_nll - 1e-9, "instance {seed}, l2 {l2}: training loss fell");
            last_norm = n;
            last_nll = nll;
        }
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let inst = Instance::random(7, 80, 4);
    let x64 = design(&inst);
    let mut x32 = SparseMatrix::<f32>::new(4);
    for r in &inst.rows {
        x32.push_row(r.iter().map(|&v| v as f32).enumerate().filter(|(_, v)| *v != 0.0));
    }
    let cfg = LogisticConfig { l2: 0.1, max_iters: 5000, tolerance: 1e-4 };
    let a = logistic::fit::<f64, _>(&x64, &inst.labels, &cfg).unwrap();
    let b = logistic::fit::<f32, _>(&x32, &inst.labels, &cfg).unwrap();
    for (p, q) in a.weights.iter().zip(&b.weights) {
        assert!((p - *q as f64).abs() < 1e-2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_never_increases_the_objective(seed in 0u64..10_000, l2 in 0.0f64..2.0) {
        let inst = Instance::random(seed, 30, 3);
        let x = design(&inst);
        let fit = logistic::fit::<f64, _>(&x, &inst.labels, &LogisticConfig { l2, ..Default::default() }).unwrap();
        let start = inst.objective(l2, &[0.0; 3], 0.0);
        prop_assert!(fit.objective <= start + 1e-12);
        prop_assert!(fit.weights.iter().all(|w| w.is_finite()));
        let probs = fit.predict_proba(&x);
        prop_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
