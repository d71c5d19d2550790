mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochtransit_core::gp::batch::{self, EdgeModel, FitStatus, GpFitConfig};
use stochtransit_core::gp::KernelParams;

fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> (KernelParams, Vec<f64>, Vec<f64>) {
    let s2 = rng.random_range(100.0..2000.0);
    let l = rng.random_range(0.5..6.0);
    let sn2 = s2 * rng.random_range(0.02..0.5);
    let x = uniform_inputs(rng, n, 0.0, 24.0);
    let y: Vec<f64> = x.iter().map(|&t| 500.0 + 80.0 * (t / 4.0).sin() + rng.random_range(-40.0..40.0)).collect();
    (KernelParams::new(s2, l, sn2).unwrap(), x, y)
}

#[test]
fn mll_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [1usize, 2, 7, 20, 50] {
        for _ in 0..5 {
            let (p, x, y) = random_problem(&mut rng, n);
            let got = batch::mll(&p, &x, &y).unwrap();
            let want = dense_mll(p.signal_var, p.length_scale, p.noise_var, &x, &y);
            assert!((got - want).abs() < 1e-8, "n={n}: {got} vs {want}");
        }
    }
}

#[test]
fn posterior_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [3usize, 15, 50] {
        let (p, x, y) = random_problem(&mut rng, n);
        let m = EdgeModel::new(p, x.clone(), y.clone(), FitStatus::Converged).unwrap();
        let ybar = y.iter().sum::<f64>() / n as f64;
        for k in 0..=48 {
            let t = k as f64 * 0.5;
            let got = m.posterior(t);
            let (mu, var) = dense_posterior(p.signal_var, p.length_scale, p.noise_var, ybar, &x, &y, t);
            assert!((got.mean - mu).abs() < 1e-8 * mu.abs().max(1.0), "mean at {t}: {} vs {mu}", got.mean);
            assert!((got.var - var).abs() < 1e-8 * var.max(1.0), "var at {t}: {} vs {var}", got.var);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let (p, x, y) = random_problem(&mut rng, 30);
        let (_, g) = batch::mll_with_gradient(&p, &x, &y).unwrap();
        let th = p.to_log();
        for k in 0..3 {
            let h = 1e-5;
            let (mut a, mut b) = (th, th);
            a[k] += h;
            b[k] -= h;
            let fa = dense_mll(a[0].exp(), a[1].exp(), a[2].exp(), &x, &y);
            let fb = dense_mll(b[0].exp(), b[1].exp(), b[2].exp(), &x, &y);
            let fd = (fa - fb) / (2.0 * h);
            let tol = 1e-4 * fd.abs().max(g[k].abs()).max(1e-3);
            assert!((g[k] - fd).abs() <= tol, "component {k}: analytic {} vs fd {fd}", g[k]);
        }
    }
}

fn recovery_fit(seed: u64) -> (KernelParams, f64, f64) {
    let (s2, l, sn2) = (900.0, 2.0, 100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_inputs(&mut rng, 500, 0.0, 24.0);
    let y: Vec<f64> = sample_gp(&mut rng, s2, l, sn2, &x).into_iter().map(|v| v + 600.0).collect();
    let out = batch::fit(&x, &y, &GpFitConfig { seed, ..GpFitConfig::default() }).unwrap();
    (*out.model.params(), out.mll, dense_mll(s2, l, sn2, &x, &y))
}

#[test]
fn fit_reaches_the_generating_likelihood() {
    // the optimizer must do at least as well as the true parameters, and the
    // noise level is pinned down by 500 points
    for seed in [1u64, 2, 3] {
        let (p, fitted, truth) = recovery_fit(seed);
        assert!(fitted >= truth - 1e-6, "seed {seed}: {fitted} < {truth}");
        assert!((p.noise_var / 100.0).ln().abs() <= 0.2, "seed {seed}: noise {}", p.noise_var);
    }
}

#[test]
#[ignore = "one draw on a 24 h window does not identify the signal variance to 20%; see README"]
fn recovers_all_generating_hyperparameters() {
    for seed in [1u64, 2, 3] {
        let (p, _, _) = recovery_fit(seed);
        for (name, got, want) in [("signal", p.signal_var, 900.0), ("length", p.length_scale, 2.0), ("noise", p.noise_var, 100.0)] {
            let err = (got / want).ln().abs();
            assert!(err <= 0.2, "seed {seed} {name}: {got} vs {want} (log error {err:.3})");
        }
    }
}

#[test]
fn fit_beats_every_start_and_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = uniform_inputs(&mut rng, 120, 0.0, 24.0);
    let y = sample_gp(&mut rng, 400.0, 3.0, 40.0, &x);
    let a = batch::fit(&x, &y, &GpFitConfig::default()).unwrap();
    let b = batch::fit(&x, &y, &GpFitConfig::default()).unwrap();
    assert_eq!(a.model.params(), b.model.params());
    for s in &a.starts {
        if let Some(v) = s.mll {
            assert!(a.mll >= v - 1e-9);
        }
    }
    let p = a.model.params();
    let direct = dense_mll(p.signal_var, p.length_scale, p.noise_var, a.model.inputs(), a.model.targets());
    assert!((a.mll - direct).abs() < 1e-6);
}

#[test]
fn sparse_edges_inherit_network_hyperparameters() {
    let p1 = KernelParams::new(100.0, 1.0, 10.0).unwrap();
    let p2 = KernelParams::new(400.0, 4.0, 40.0).unwrap();
    let m1 = EdgeModel::new(p1, vec![1.0, 2.0], vec![100.0, 110.0], FitStatus::Converged).unwrap();
    let m2 = EdgeModel::new(p2, vec![1.0, 2.0], vec![300.0, 310.0], FitStatus::Converged).unwrap();
    let prior = batch::network_prior(&[&m1, &m2]).unwrap();
    assert!((prior.params.signal_var - 200.0).abs() < 1e-9);
    assert!((prior.params.length_scale - 2.0).abs() < 1e-12);
    assert!((prior.mean - 205.0).abs() < 1e-12);

    let empty = batch::inherit(&[], &[], &prior).unwrap();
    assert_eq!(empty.status(), FitStatus::NoData);
    let g = empty.posterior(8.0);
    assert_eq!(g.mean, 205.0);
    assert!((g.var - prior.params.prior_variance()).abs() < 1e-9);

    let few = batch::inherit(&[8.0; 3], &[50.0, 60.0, 70.0], &prior).unwrap();
    assert_eq!(few.status(), FitStatus::Inherited);
    assert!((few.mean() - 60.0).abs() < 1e-12);
    assert!(batch::fit(&[8.0; 3], &[50.0, 60.0, 70.0], &GpFitConfig::default()).is_err());
}

#[test]
fn record_round_trip_reproduces_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (p, x, y) = random_problem(&mut rng, 25);
    let m = EdgeModel::new(p, x, y, FitStatus::Converged).unwrap();
    let back = EdgeModel::from_record(m.record()).unwrap();
    for k in 0..24 {
        assert_eq!(m.posterior(k as f64), back.posterior(k as f64));
    }
}
