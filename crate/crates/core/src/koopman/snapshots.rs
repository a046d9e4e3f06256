use faer::{Mat, MatRef};

use super::embedding::{build_delay_embedding, DelayBuffer, EmbeddingConfig};
use super::lift::Lift;
use crate::error::{Error, Result};
use crate::series::TimeSeriesData;

/// Snapshot matrices for sample indices `k = z, …, q − 2`.
///
/// Column `j` of every matrix belongs to index `first_index + j`; `X⁺` and `Υ⁺` are shifted
/// by one step.
#[derive(Debug, Clone)]
pub struct Snapshots {
    pub x: Mat<f64>,
    pub x_plus: Mat<f64>,
    pub u: Mat<f64>,
    /// Lifted features for indices `z, …, q − 1`; the first `n` columns are `Υ`, the last `n` are `Υ⁺`.
    lifted: Mat<f64>,
    pub first_index: usize,
}

impl Snapshots {
    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }

    pub fn upsilon(&self) -> MatRef<'_, f64> {
        self.lifted.get(.., ..self.n_columns())
    }

    pub fn upsilon_plus(&self) -> MatRef<'_, f64> {
        self.lifted.get(.., 1..)
    }

    /// `[X; U; Υ]`.
    pub fn regressor(&self) -> Mat<f64> {
        crate::linalg::vstack(&[self.x.as_ref(), self.u.as_ref(), self.upsilon()])
    }
}

pub fn assemble_snapshots(data: &TimeSeriesData, cfg: &EmbeddingConfig, lift: &Lift) -> Result<Snapshots> {
    cfg.validate()?;
    let z = cfg.delays;
    let q = data.len();
    if q < z + 2 {
        return Err(Error::Data(format!("series of length {q} is too short for delay length {z} (need {})", z + 2)));
    }
    let p = data.n_observables();
    let m = data.n_inputs();
    let n = q - 1 - z;
    let x = data.observables.get(.., z..z + n).to_owned();
    let x_plus = data.observables.get(.., z + 1..z + 1 + n).to_owned();
    let u = data.inputs.get(.., z..z + n).to_owned();

    let l = lift.dim();
    let mut lifted = Mat::zeros(l, n + 1);
    if l > 0 {
        let mut buf = DelayBuffer::from_embedding(build_delay_embedding(data, cfg, z)?, p, m, z)?;
        let mut scratch = Vec::new();
        let mut out = vec![0.0; l];
        for j in 0..=n {
            let k = z + j;
            let g = data.observable(k);
            lift.evaluate_into(&g, buf.as_slice(), &mut scratch, &mut out)?;
            for (i, &v) in out.iter().enumerate() {
                lifted[(i, j)] = v;
            }
            buf.push(&g, &data.input(k));
        }
    }
    Ok(Snapshots {
        x,
        x_plus,
        u,
        lifted,
        first_index: z,
    })
}
