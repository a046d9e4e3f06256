use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::ThinSvd;

/// Leading eigenvectors of `B·Bᵀ`, obtained from the left singular vectors of `B`.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub phi: Mat<f64>,
    /// Retained eigenvalues of `B·Bᵀ`, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained over total eigenvalue mass.
    pub energy_fraction: f64,
}

impl PodBasis {
    pub fn n_modes(&self) -> usize {
        self.phi.ncols()
    }

    pub fn from_svd(svd: &ThinSvd, zeta: usize) -> Result<Self> {
        if zeta == 0 {
            return Err(Error::InvalidArgument("at least one POD mode is required".into()));
        }
        if zeta > svd.rank() {
            return Err(Error::RankTooLow {
                requested: zeta,
                rank: svd.rank(),
            });
        }
        let eig: Vec<f64> = svd.s.iter().map(|s| s * s).collect();
        let total: f64 = eig.iter().sum();
        let kept = &eig[..zeta];
        Ok(Self {
            phi: svd.u.get(.., ..zeta).to_owned(),
            eigenvalues: kept.to_vec(),
            energy_fraction: kept.iter().sum::<f64>() / total,
        })
    }
}

/// POD of the stacked snapshot matrix `B = [X; U; Υ]` keeping `zeta` modes.
///
/// Directions with singular value below `rel_tol·s_max` count as null when checking `zeta`.
pub fn compute_pod(b: MatRef<'_, f64>, zeta: usize, rel_tol: f64) -> Result<PodBasis> {
    if b.norm_max() == 0.0 {
        return Err(Error::Data("snapshot matrix is identically zero".into()));
    }
    let svd = ThinSvd::new(b, rel_tol)?;
    PodBasis::from_svd(&svd, zeta)
}
