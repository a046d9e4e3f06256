//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use faer::Mat;
use koopman_uq::vamp::{PriorKind, PriorSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> Mat<f64> {
    let mut a = Mat::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            let v: f64 = rng.sample(StandardNormal);
            a[(i, j)] = scale * v;
        }
    }
    a
}

/// Product of two Gaussian factors, giving a matrix of rank at most `rank`.
pub fn low_rank_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, rank: usize) -> Mat<f64> {
    let b = gaussian_matrix(rng, m, rank, 1.0);
    let c = gaussian_matrix(rng, rank, n, 1.0 / (n as f64).sqrt());
    &b * &c
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn to_na(a: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Exact posterior mean and average posterior variance of `x ~ N(mean, var·I)` given
/// `y = A·x + N(0, 1/γ_w·I)`.
pub fn dense_gaussian_posterior(a: &Mat<f64>, y: &[f64], gamma_w: f64, mean: f64, var: f64) -> (Vec<f64>, f64) {
    let a = to_na(a);
    let n = a.ncols();
    let q = a.transpose() * &a * gamma_w + DMatrix::identity(n, n) / var;
    let cov = q.try_inverse().expect("posterior precision is positive definite");
    let rhs = a.transpose() * DVector::from_column_slice(y) * gamma_w + DVector::from_element(n, mean / var);
    let x = &cov * rhs;
    (x.iter().copied().collect(), cov.trace() / n as f64)
}

/// Composite Simpson rule with `n` panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Posterior mean and variance of a scalar under the prior, given `r = x + N(0, 1/γ)`,
/// from direct quadrature of the slab and an exact point mass at zero.
pub fn scalar_posterior_quadrature(prior: &PriorSpec, r: f64, gamma: f64) -> (f64, f64) {
    let rate = match prior.kind {
        PriorKind::Gaussian => 1.0,
        PriorKind::BernoulliGaussian => prior.rho,
    };
    let noise_var = 1.0 / gamma;
    let lik = |x: f64| normal_pdf(r, x, noise_var);
    let slab = |x: f64| normal_pdf(x, prior.mean, prior.variance) * lik(x);
    let width = 14.0 * prior.variance.sqrt().max(noise_var.sqrt());
    let lo = r.min(prior.mean) - width;
    let hi = r.max(prior.mean) + width;
    let narrow = prior.variance.sqrt().min(noise_var.sqrt());
    let n = (((hi - lo) / narrow) * 60.0).ceil() as usize;
    let z_slab = simpson(&slab, lo, hi, n);
    let m1 = simpson(|x| x * slab(x), lo, hi, n);
    let m2 = simpson(|x| x * x * slab(x), lo, hi, n);
    let z = rate * z_slab + (1.0 - rate) * lik(0.0);
    let mean = rate * m1 / z;
    let second = rate * m2 / z;
    (mean, second - mean * mean)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// A Bernoulli-Gaussian compressed-sensing instance at the requested SNR (dB).
pub struct SparseInstance {
    pub a: Mat<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub noise_precision: f64,
}

pub fn sparse_instance(rng: &mut ChaCha8Rng, m: usize, n: usize, rho: f64, snr_db: f64) -> SparseInstance {
    let a = gaussian_matrix(rng, m, n, 1.0 / (m as f64).sqrt());
    let x: Vec<f64> = (0..n)
        .map(|_| {
            let on = rng.gen::<f64>() < rho;
            let v: f64 = rng.sample(StandardNormal);
            if on {
                v / rho.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let clean: Vec<f64> = (0..m).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect();
    let power = clean.iter().map(|v| v * v).sum::<f64>() / m as f64;
    let noise_var = power / 10f64.powf(snr_db / 10.0);
    let y = clean
        .iter()
        .map(|c| c + noise_var.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SparseInstance {
        a,
        x,
        y,
        noise_precision: 1.0 / noise_var,
    }
}

pub fn nmse(est: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = est.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    num / den
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn config_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}
