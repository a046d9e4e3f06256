use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_t_vec, mat_vec, ThinSvd};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-12;

/// Linear measurement model `y = A·x + n` with noise precision `γ_w` and a cached SVD.
#[derive(Debug, Clone)]
pub struct SensingModel {
    a: Mat<f64>,
    noise_precision: f64,
    svd: ThinSvd,
}

impl SensingModel {
    pub fn new(a: Mat<f64>, noise_precision: f64) -> Result<Self> {
        if !(noise_precision > 0.0 && noise_precision.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise precision must be positive, got {noise_precision}")));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidArgument("sensing matrix must be non-empty".into()));
        }
        let svd = ThinSvd::new(a.as_ref(), RANK_TOLERANCE)?;
        Ok(Self { a, noise_precision, svd })
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.a
    }

    pub fn noise_precision(&self) -> f64 {
        self.noise_precision
    }

    pub fn svd(&self) -> &ThinSvd {
        &self.svd
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    pub fn n_measurements(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_unknowns(&self) -> usize {
        self.a.ncols()
    }

    pub fn with_noise_precision(&self, noise_precision: f64) -> Result<Self> {
        if !(noise_precision > 0.0 && noise_precision.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise precision must be positive, got {noise_precision}")));
        }
        Ok(Self {
            noise_precision,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmmsePath {
    /// Dense Cholesky of `γ_w·AᵀA + γ_e·I`, `O(N³)`.
    Direct,
    /// Diagonal solve in the right-singular basis, `O(N·R)`.
    #[default]
    Svd,
}

/// LMMSE estimate of `x` from `y` and the Gaussian message `N(x_e, 1/γ_e·I)`.
///
/// Returns the posterior mean and the scalar precision `N / Tr[(γ_w·AᵀA + γ_e·I)⁻¹]`.
pub fn lmmse_estimate(model: &SensingModel, y: &[f64], x_e: &[f64], gamma_e: f64, path: LmmsePath) -> Result<(Vec<f64>, f64)> {
    if !(gamma_e > 0.0) {
        return Err(Error::InvalidArgument(format!("extrinsic precision must be positive, got {gamma_e}")));
    }
    if y.len() != model.n_measurements() || x_e.len() != model.n_unknowns() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: A is {}×{}, y has {}, x_e has {}",
            model.n_measurements(),
            model.n_unknowns(),
            y.len(),
            x_e.len()
        )));
    }
    match path {
        LmmsePath::Direct => lmmse_direct(model, y, x_e, gamma_e),
        LmmsePath::Svd => Ok(lmmse_svd(model, y, x_e, gamma_e)),
    }
}

fn lmmse_direct(model: &SensingModel, y: &[f64], x_e: &[f64], gamma_e: f64) -> Result<(Vec<f64>, f64)> {
    let n = model.n_unknowns();
    let gw = model.noise_precision;
    let a = model.a.as_ref();
    let mut q = a.transpose() * a;
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] *= gw;
        }
        q[(i, i)] += gamma_e;
    }
    let chol = q
        .llt(Side::Lower)
        .map_err(|e| Error::Linalg(format!("LMMSE system not positive definite: {e:?}")))?;
    let aty = mat_t_vec(a, y);
    let rhs = Mat::from_fn(n, 1, |i, _| gw * aty[i] + gamma_e * x_e[i]);
    let x = chol.solve(&rhs);
    let inv = chol.inverse();
    let trace: f64 = (0..n).map(|i| inv[(i, i)]).sum();
    Ok(((0..n).map(|i| x[(i, 0)]).collect(), n as f64 / trace))
}

fn lmmse_svd(model: &SensingModel, y: &[f64], x_e: &[f64], gamma_e: f64) -> (Vec<f64>, f64) {
    let n = model.n_unknowns();
    let gw = model.noise_precision;
    let svd = &model.svd;
    // x̂ = x_e + V·diag(γ_w·s / (γ_w·s² + γ_e))·(Uᵀy − s∘Vᵀx_e)
    let uty = mat_t_vec(svd.u.as_ref(), y);
    let vtx = mat_t_vec(svd.v.as_ref(), x_e);
    let coef: Vec<f64> = svd
        .s
        .iter()
        .zip(uty.iter().zip(&vtx))
        .map(|(&s, (&d, &c))| gw * s * (d - s * c) / (gw * s * s + gamma_e))
        .collect();
    let corr = mat_vec(svd.v.as_ref(), &coef);
    let x: Vec<f64> = x_e.iter().zip(&corr).map(|(a, b)| a + b).collect();
    let r = svd.rank();
    let trace: f64 = svd.s.iter().map(|&s| 1.0 / (gw * s * s + gamma_e)).sum::<f64>() + (n - r) as f64 / gamma_e;
    (x, n as f64 / trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_sensing_fuses_symmetrically() {
        let m = SensingModel::new(Mat::identity(3, 3), 1.0).unwrap();
        let y = [1.0, 2.0, 3.0];
        let xe = [3.0, 0.0, -1.0];
        for path in [LmmsePath::Direct, LmmsePath::Svd] {
            let (x, g) = lmmse_estimate(&m, &y, &xe, 1.0, path).unwrap();
            assert!(x.iter().zip([2.0, 1.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-14));
            assert!((g - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn confident_message_dominates() {
        let a = Mat::from_fn(2, 4, |i, j| (i + 2 * j) as f64 * 0.3 - 0.5);
        let m = SensingModel::new(a, 1.0).unwrap();
        let xe = [0.4, -0.2, 1.1, 0.0];
        let (x, _) = lmmse_estimate(&m, &[5.0, -5.0], &xe, 1e12, LmmsePath::Svd).unwrap();
        assert!(x.iter().zip(&xe).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = SensingModel::new(Mat::identity(2, 2), 1.0).unwrap();
        assert!(lmmse_estimate(&m, &[1.0, 2.0], &[0.0, 0.0], 0.0, LmmsePath::Svd).is_err());
        assert!(lmmse_estimate(&m, &[1.0], &[0.0, 0.0], 1.0, LmmsePath::Svd).is_err());
        assert!(SensingModel::new(Mat::identity(2, 2), 0.0).is_err());
    }
}
