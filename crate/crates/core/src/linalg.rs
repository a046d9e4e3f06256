//! Thin wrappers over `faer` for the handful of dense kernels the pipeline needs.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// Thin singular value decomposition `A = U·diag(s)·Vᵀ`, truncated to the numerical rank.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

impl ThinSvd {
    /// Factorizes `a` and drops singular values at or below `rel_tol · s_max`.
    pub fn new(a: MatRef<'_, f64>, rel_tol: f64) -> Result<Self> {
        let full = a
            .thin_svd()
            .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
        let s_all: Vec<f64> = full.S().column_vector().iter().copied().collect();
        let s_max = s_all.first().copied().unwrap_or(0.0);
        let cutoff = rel_tol * s_max;
        let rank = s_all.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
        let mut u = full.U().get(.., ..rank).to_owned();
        let mut v = full.V().get(.., ..rank).to_owned();
        canonicalize_signs(&mut u, &mut v);
        Ok(Self {
            u,
            s: s_all[..rank].to_vec(),
            v,
        })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `target · A†` without forming the pseudoinverse explicitly.
    pub fn right_solve(&self, target: MatRef<'_, f64>) -> Mat<f64> {
        // target · V · S⁻¹ · Uᵀ
        let mut tv = target * self.v.as_ref();
        for (j, &s) in self.s.iter().enumerate() {
            let inv = 1.0 / s;
            for i in 0..tv.nrows() {
                tv[(i, j)] *= inv;
            }
        }
        tv * self.u.transpose()
    }

    pub fn reconstruct(&self) -> Mat<f64> {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            for i in 0..us.nrows() {
                us[(i, j)] *= s;
            }
        }
        us * self.v.transpose()
    }
}

/// Flips singular vector pairs so the largest-magnitude entry of each left vector is positive.
/// Keeps factorizations reproducible and comparable across runs.
fn canonicalize_signs(u: &mut Mat<f64>, v: &mut Mat<f64>) {
    for j in 0..u.ncols() {
        let mut best = 0.0f64;
        for i in 0..u.nrows() {
            if u[(i, j)].abs() > best.abs() {
                best = u[(i, j)];
            }
        }
        if best < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

/// `target · regressor†` via SVD with a relative singular-value cutoff.
pub fn lstsq_right(target: MatRef<'_, f64>, regressor: MatRef<'_, f64>, rel_tol: f64) -> Result<Mat<f64>> {
    if target.ncols() != regressor.ncols() {
        return Err(Error::InvalidArgument(format!(
            "column mismatch: target has {}, regressor has {}",
            target.ncols(),
            regressor.ncols()
        )));
    }
    if regressor.norm_max() == 0.0 {
        return Err(Error::Data("regressor matrix is identically zero".into()));
    }
    let svd = ThinSvd::new(regressor, rel_tol)?;
    Ok(svd.right_solve(target))
}

pub fn max_singular_value(a: MatRef<'_, f64>) -> Result<f64> {
    let s = a
        .singular_values()
        .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

pub fn mat_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut out = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            *o += aij * xj;
        }
    }
    out
}

pub fn mat_t_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    (0..a.ncols())
        .map(|j| a.col(j).iter().zip(x).map(|(aij, xi)| aij * xi).sum())
        .collect()
}

pub fn column(a: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    a.col(j).iter().copied().collect()
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Stacks matrices with equal column counts on top of one another.
pub fn vstack(blocks: &[MatRef<'_, f64>]) -> Mat<f64> {
    let ncols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let nrows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(nrows, ncols);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), ncols, "vstack: column mismatch");
        out.get_mut(r0..r0 + b.nrows(), ..).copy_from(b);
        r0 += b.nrows();
    }
    out
}
