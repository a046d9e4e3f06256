mod common;

use std::collections::HashSet;

use common::*;
use faer::Mat;
use koopman_uq::koopman::{
    assemble_snapshots, build_delay_embedding, compute_pod, fit_model, n_monomials, EmbeddingConfig, FitMode,
    FitOptions, LiftSpec,
};
use koopman_uq::series::TimeSeriesData;
use koopman_uq::sim::{hopf_drift, simulate_hopf, HopfParams, HopfState};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pod_eigenvalues_match_dense_gram_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let b = gaussian_matrix(&mut rng, 20, 50, 1.0);
    let pod = compute_pod(b.as_ref(), 5, 1e-10).unwrap();

    let nb = to_na(&b);
    let eig = SymmetricEigen::new(&nb * nb.transpose());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = vals.iter().sum();
    for (got, want) in pod.eigenvalues.iter().zip(&vals) {
        assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
    }
    let energy = vals[..5].iter().sum::<f64>() / total;
    assert!((pod.energy_fraction - energy).abs() < 1e-10);

    // columns are orthonormal eigenvectors of B·Bᵀ
    let phi = to_na(&pod.phi);
    let gram = phi.transpose() * &phi;
    assert!((gram - DMatrix::identity(5, 5)).abs().max() < 1e-12);
    let bbt = &nb * nb.transpose();
    for j in 0..5 {
        let v = phi.column(j);
        let r = &bbt * v - v * pod.eigenvalues[j];
        assert!(r.norm() < 1e-9 * pod.eigenvalues[j]);
    }
}

/// All exponent vectors over `d` variables with total degree in `lo..=hi`, by brute force.
fn enumerate_exponents(d: usize, lo: u32, hi: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(d, left - e, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    rec(d, hi, &mut Vec::new(), &mut all);
    all.retain(|e| (lo..=hi).contains(&e.iter().sum::<u32>()));
    all
}

#[test]
fn lift_dimension_matches_enumeration() {
    for d in [1usize, 2, 5, 10] {
        let spec = LiftSpec::polynomial(4, false);
        let lift = spec.compile(d, 3).unwrap();
        let expected = enumerate_exponents(d, 2, 4);
        assert_eq!(lift.dim(), expected.len(), "d = {d}");
        assert_eq!(lift.dim(), (2..=4).map(|k| n_monomials(d, k)).sum::<usize>());
        let got: HashSet<Vec<u32>> = (0..lift.dim()).map(|i| lift.exponents(i)).collect();
        assert_eq!(got, expected.into_iter().collect::<HashSet<_>>());
        let degrees: Vec<u32> = (0..lift.dim()).map(|i| lift.exponents(i).iter().sum()).collect();
        assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn lifted_features_are_the_monomials_they_name() {
    let spec = LiftSpec::polynomial(3, true);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = gaussian_vec(&mut rng, 2, 1.0);
    let h = gaussian_vec(&mut rng, 4, 1.0);
    let lift = spec.compile(2, 4).unwrap();
    let v = lift.evaluate(&g, &h).unwrap();
    let vars: Vec<f64> = g.iter().chain(&h).copied().collect();
    for (i, &val) in v.iter().enumerate() {
        let want: f64 = lift.exponents(i).iter().zip(&vars).map(|(&e, x)| x.powi(e as i32)).product();
        assert!((val - want).abs() < 1e-14 * want.abs().max(1.0));
    }
}

fn random_series(rng: &mut ChaCha8Rng, p: usize, m: usize, q: usize) -> TimeSeriesData {
    let obs = gaussian_matrix(rng, p, q, 1.0);
    let inp = gaussian_matrix(rng, m, q, 1.0);
    TimeSeriesData::new(0.1, obs, inp).unwrap()
}

#[test]
fn fitted_operator_solves_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = random_series(&mut rng, 2, 1, 300);
    let cfg = EmbeddingConfig { delays: 2 };
    let spec = LiftSpec::polynomial(2, true);
    let model = fit_model(&data, &cfg, &spec, &FitOptions::new(FitMode::NonlinearFull)).unwrap();

    let snaps = assemble_snapshots(&data, &cfg, model.lift()).unwrap();
    let r = to_na(&snaps.regressor());
    let xp = to_na(&snaps.x_plus);
    let gram = &r * r.transpose();
    let want = (&xp * r.transpose()) * gram.try_inverse().unwrap();
    let got = to_na(&model.effective_operator());
    let err = (&got - &want).abs().max() / want.abs().max();
    assert!(err < 1e-8, "relative operator error {err}");

    let resid = &xp - &got * &r;
    let mse = resid.iter().map(|e| e * e).sum::<f64>() / resid.len() as f64;
    assert!((model.residual_variance - mse).abs() < 1e-10 * mse);
}

#[test]
fn linear_full_predicts_the_lifted_features_too() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data = random_series(&mut rng, 1, 1, 200);
    let cfg = EmbeddingConfig { delays: 1 };
    let spec = LiftSpec::polynomial(2, true);
    let model = fit_model(&data, &cfg, &spec, &FitOptions::new(FitMode::LinearFull)).unwrap();
    assert_eq!(model.operator.nrows(), 1 + model.lift_dim());
    assert_eq!(model.operator.ncols(), model.regressor_dim());
    let h = build_delay_embedding(&data, &cfg, 5).unwrap();
    let mut r = model.regressor(&data.observable(5), &data.input(5), &h).unwrap();
    model.scale_regressor(&mut r);
    assert_eq!(model.predict_lifted_linear(&r).unwrap().len(), model.lift_dim());
}

#[test]
fn hopf_residual_matches_the_injected_noise() {
    let p = HopfParams {
        noise: 0.01,
        ..Default::default()
    };
    let dt = 0.04;
    let data = simulate_hopf(&p, HopfState::default(), dt, 6000, 4).unwrap();
    let model = fit_model(
        &data,
        &EmbeddingConfig { delays: 9 },
        &LiftSpec::polynomial(4, true),
        &FitOptions::new(FitMode::NonlinearFull),
    )
    .unwrap();

    // one-step innovation of x1 around an explicit drift step
    let s = data.states.as_ref().unwrap();
    let mut innov = Vec::new();
    for k in 0..s.ncols() - 1 {
        let x = [s[(0, k)], s[(1, k)]];
        let f = hopf_drift(&p, x);
        innov.push(s[(0, k + 1)] - x[0] - dt * f[0]);
    }
    let m = innov.iter().sum::<f64>() / innov.len() as f64;
    let empirical = innov.iter().map(|e| (e - m).powi(2)).sum::<f64>() / innov.len() as f64;
    let kick = 2.0 * p.noise * dt;
    assert!((empirical - kick).abs() < 0.1 * kick, "empirical kick variance {empirical} vs {kick}");
    let ratio = model.residual_variance / kick;
    assert!(ratio > 0.8 && ratio < 1.25, "residual {} vs noise {kick}", model.residual_variance);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn snapshot_columns_stay_aligned(seed in any::<u64>(), z in 1usize..5, p in 1usize..3, m in 0usize..2, extra in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = z + extra;
        let data = random_series(&mut rng, p, m, q);
        let cfg = EmbeddingConfig { delays: z };
        let lift = LiftSpec::polynomial(2, true).compile(p, cfg.dim(p, m)).unwrap();
        let s = assemble_snapshots(&data, &cfg, &lift).unwrap();
        prop_assert_eq!(s.n_columns(), q - 1 - z);
        prop_assert_eq!(s.first_index, z);
        for j in 0..s.n_columns() {
            let k = z + j;
            for i in 0..p {
                prop_assert_eq!(s.x[(i, j)], data.observables[(i, k)]);
                prop_assert_eq!(s.x_plus[(i, j)], data.observables[(i, k + 1)]);
            }
            for i in 0..m {
                prop_assert_eq!(s.u[(i, j)], data.inputs[(i, k)]);
            }
            let want = lift.evaluate(&data.observable(k), &build_delay_embedding(&data, &cfg, k).unwrap()).unwrap();
            let next = lift.evaluate(&data.observable(k + 1), &build_delay_embedding(&data, &cfg, k + 1).unwrap()).unwrap();
            for (i, (&a, &b)) in want.iter().zip(&next).enumerate() {
                prop_assert_eq!(s.upsilon()[(i, j)], a);
                prop_assert_eq!(s.upsilon_plus()[(i, j)], b);
            }
        }
    }

    #[test]
    fn full_rank_pod_reproduces_full_fit(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_series(&mut rng, 2, 1, 120);
        let cfg = EmbeddingConfig { delays: 1 };
        let spec = LiftSpec::polynomial(2, false);
        let full = fit_model(&data, &cfg, &spec, &FitOptions::new(FitMode::NonlinearFull)).unwrap();
        let pod = fit_model(&data, &cfg, &spec, &FitOptions::pod(full.regressor_dim())).unwrap();
        let d: Mat<f64> = full.sensing().to_owned() - pod.sensing().to_owned();
        prop_assert!(d.norm_max() < 1e-9 * full.sensing().norm_max());
    }
}
