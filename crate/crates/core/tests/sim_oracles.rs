use koopman_uq::sim::{
    compute_ftle, ftle_on_grid, hopf_drift, mean_isi, neuron_rhs, settle_neuron, simulate_hopf, simulate_neuron, spike_times,
    ConstantJacobian, HopfParams, HopfState, NeuronParams, NeuronState,
};
use nalgebra::{Matrix2, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dormand–Prince 5(4) with error control, sampled by dense stepping onto a uniform grid.
fn dopri_neuron(p: &NeuronParams, x0: [f64; 4], t_end: f64, dt_out: f64, tol: f64) -> Vec<f64> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let _ = C;
    let f = |x: &[f64; 4]| neuron_rhs(p, x, 0.0);
    let mut out = vec![x0[0]];
    let mut x = x0;
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    let mut next = dt_out;
    while next <= t_end + 1e-12 {
        // never step past the next output time so samples are exact step endpoints
        let hs = h.min(next - t);
        let mut k = [[0.0; 4]; 7];
        k[0] = f(&x);
        for s in 1..7 {
            let mut xs = x;
            for i in 0..4 {
                xs[i] += hs * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = f(&xs);
        }
        let mut x5 = x;
        let mut err: f64 = 0.0;
        for i in 0..4 {
            let d5: f64 = (0..7).map(|j| B5[j] * k[j][i]).sum();
            let d4: f64 = (0..7).map(|j| B4[j] * k[j][i]).sum();
            x5[i] += hs * d5;
            let sc = tol * (1.0 + x[i].abs().max(x5[i].abs()));
            err = err.max((hs * (d5 - d4)).abs() / sc);
        }
        if err <= 1.0 {
            t += hs;
            x = x5;
            if (t - next).abs() < 1e-12 {
                out.push(x[0]);
                next += dt_out;
            }
        }
        h = (hs * 0.9 * err.max(1e-10).powf(-0.2)).clamp(1e-8, 0.05);
    }
    out
}

#[test]
fn neuron_spike_train_matches_adaptive_reference() {
    let p = NeuronParams::default();
    let dt = 0.025;
    let n = (300.0 / dt) as usize;
    let rk4 = simulate_neuron(&p, NeuronState::default(), &|_| 0.0, dt, n, 1).unwrap();
    let v: Vec<f64> = rk4.observables.row(0).iter().copied().collect();
    let reference = dopri_neuron(&p, NeuronState::default().to_array(), n as f64 * dt, dt, 1e-10);
    assert_eq!(reference.len(), v.len());
    let s_rk4 = spike_times(&v, 0.0, dt, 0.0);
    let s_ref = spike_times(&reference, 0.0, dt, 0.0);
    assert!(s_ref.len() > 10);
    assert_eq!(s_rk4.len(), s_ref.len());
    for (a, b) in s_rk4.iter().zip(&s_ref).filter(|(_, &b)| b < 100.0) {
        assert!((a - b).abs() < dt, "spike at {a} vs reference {b}");
    }
    let (i_rk4, i_ref) = (mean_isi(&s_rk4).unwrap(), mean_isi(&s_ref).unwrap());
    let err1 = (i_rk4 - i_ref).abs();
    assert!(err1 < 2e-3 * i_ref, "mean ISI {i_rk4} vs reference {i_ref}");
    let fine = simulate_neuron(&p, NeuronState::default(), &|_| 0.0, dt, n, 4).unwrap();
    let v4: Vec<f64> = fine.observables.row(0).iter().copied().collect();
    let err4 = (mean_isi(&spike_times(&v4, 0.0, dt, 0.0)).unwrap() - i_ref).abs();
    assert!(err4 < err1 / 10.0, "substep refinement {err1} -> {err4}");
}

#[test]
fn unforced_neuron_period() {
    let p = NeuronParams::default();
    let dt = 0.025;
    let x0 = settle_neuron(&p, NeuronState::default(), 500.0, dt, 1).unwrap();
    let d = simulate_neuron(&p, x0, &|_| 0.0, dt, (200.0 / dt) as usize, 1).unwrap();
    let v: Vec<f64> = d.observables.row(0).iter().copied().collect();
    let isi = mean_isi(&spike_times(&v, 0.0, dt, 0.0)).unwrap();
    assert!((isi - 6.53).abs() < 0.01 * 6.53, "mean ISI {isi}");
}

#[test]
fn gates_stay_in_unit_interval_with_fine_substeps() {
    let p = NeuronParams::default();
    let drive = |t: f64| 6.0 * (2.0 * std::f64::consts::PI * t / 200.0 + 0.0003 * t * t).sin();
    let d = simulate_neuron(&p, NeuronState::default(), &drive, 0.025, 8000, 2).unwrap();
    let s = d.states.unwrap();
    for k in 0..s.ncols() {
        for i in [1, 2] {
            assert!(s[(i, k)] >= -1e-9 && s[(i, k)] <= 1.0 + 1e-9);
        }
    }
}

/// Mean radius and its standard error from non-overlapping batch means.
fn radius_stats(x1: &[f64], x2: &[f64], batches: usize) -> (f64, f64) {
    let r: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| (a * a + b * b).sqrt()).collect();
    let len = r.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| r[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

#[test]
fn noisy_hopf_mean_radius_matches_fine_step_reference() {
    let p = HopfParams {
        noise: 0.01,
        ..Default::default()
    };
    let t_end = 4000.0;
    let dt = 0.04;
    let d = simulate_hopf(&p, HopfState::default(), dt, (t_end / dt) as usize, 11).unwrap();
    let s = d.states.unwrap();
    let x1: Vec<f64> = s.row(0).iter().copied().collect();
    let x2: Vec<f64> = s.row(1).iter().copied().collect();
    let (m, se) = radius_stats(&x1, &x2, 40);

    // independent Euler–Maruyama at dt/10
    let h = dt / 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let normal = rand_distr::StandardNormal;
    let kick = (2.0 * p.noise * h).sqrt();
    let mut x = [1.0, 0.0];
    let (mut f1, mut f2) = (Vec::new(), Vec::new());
    for k in 0..(t_end / h) as usize {
        let f = hopf_drift(&p, x);
        let xi: f64 = rng.sample(normal);
        x = [x[0] + h * f[0] + kick * xi, x[1] + h * f[1]];
        if k % 10 == 9 {
            f1.push(x[0]);
            f2.push(x[1]);
        }
    }
    let (m_ref, se_ref) = radius_stats(&f1, &f2, 40);
    let tol = 3.0 * (se * se + se_ref * se_ref).sqrt();
    assert!((m - m_ref).abs() < tol, "mean r {m} vs fine-step {m_ref} (tol {tol})");
}

fn random_stable(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let j: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let tr = j[0] + j[3];
        let det = j[0] * j[3] - j[1] * j[2];
        if tr < 0.0 && det > 0.0 {
            return j;
        }
    }
}

#[test]
fn ftle_of_linear_systems_matches_matrix_exponential() {
    let nu = 0.5;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = random_stable(&mut rng);
        let lin = ConstantJacobian::new(2, j.to_vec());
        let f = ftle_on_grid(&lin, 0.0, 0.01, 60, nu, &[0, 1]).unwrap();
        let m = Matrix2::new(j[0], j[1], j[2], j[3]) * nu;
        let psi: SMatrix<f64, 2, 2> = m.exp();
        let sigma = psi.singular_values().max();
        let expected = sigma.ln() / nu;
        for l in &f.lambda {
            assert!((l - expected).abs() < 1e-6, "seed {seed}: {l} vs {expected}");
        }
    }
}

#[test]
fn neuron_ftle_rises_ahead_of_spikes() {
    let p = NeuronParams::default();
    let dt = 0.025;
    let d = simulate_neuron(&p, NeuronState::default(), &|_| 0.0, dt, 4000, 1).unwrap();
    let nu = 20.0 * dt;
    let f = compute_ftle(&p, &d, nu, &[0, 1]).unwrap();
    let v: Vec<f64> = d.observables.row(0).iter().copied().collect();
    let spikes = spike_times(&v, 0.0, dt, 0.0);
    let lookup = |t: f64| -> f64 {
        let i = ((t - f.times[0]) / dt).round() as usize;
        f.lambda[i]
    };
    let mut sorted = f.lambda.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let mut checked = 0;
    for &s in spikes.iter().filter(|&&s| s > f.times[0] + nu && s < f.times[f.times.len() - 1]) {
        let before = (1..=20).map(|j| lookup(s - j as f64 * dt)).fold(f64::NEG_INFINITY, f64::max);
        assert!(before > median, "spike at {s}: max FTLE before {before}, median {median}");
        checked += 1;
    }
    assert!(checked >= 10);
}
