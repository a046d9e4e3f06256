use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingConfig;
use super::lift::{Lift, LiftSpec};
use super::pod::PodBasis;
use super::snapshots::assemble_snapshots;
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, ThinSvd};
use crate::series::TimeSeriesData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// `[X⁺; Υ⁺] = A_Υ·[X; U; Υ]`.
    LinearFull,
    /// `X⁺ = A_N·[X; U; Υ]`.
    NonlinearFull,
    /// `X⁺ = A_R·Φᵀ·[X; U; Υ]`.
    NonlinearPod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub mode: FitMode,
    /// Retained POD modes `ζ`; required for [`FitMode::NonlinearPod`].
    #[serde(default)]
    pub zeta: Option<usize>,
    /// Relative singular-value cutoff of the pseudoinverse.
    #[serde(default = "default_pinv_tol")]
    pub pinv_tol: f64,
    /// Scale each regressor row to unit RMS before the decomposition.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn default_pinv_tol() -> f64 {
    1e-10
}
fn yes() -> bool {
    true
}

impl FitOptions {
    pub fn new(mode: FitMode) -> Self {
        Self {
            mode,
            zeta: None,
            pinv_tol: default_pinv_tol(),
            normalize: true,
        }
    }

    pub fn pod(zeta: usize) -> Self {
        Self {
            zeta: Some(zeta),
            ..Self::new(FitMode::NonlinearPod)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pinv_tol >= 0.0 && self.pinv_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("pinv_tol must lie in [0, 1), got {}", self.pinv_tol)));
        }
        if self.mode == FitMode::NonlinearPod && self.zeta.is_none() {
            return Err(Error::InvalidArgument("POD fit requires zeta".into()));
        }
        Ok(())
    }
}

/// A fitted forward model.
///
/// The regressor is `r = [g; u; υ]` of length `p + m + L`. Internally the model works on the
/// scaled regressor `r̃ = D·r` (`D = diag(scale)`), and [`KoopmanModel::sensing`] maps `r̃` to
/// the next observable.
#[derive(Debug, Clone)]
pub struct KoopmanModel {
    pub mode: FitMode,
    pub dt: f64,
    pub n_obs: usize,
    pub n_inputs: usize,
    pub embedding: EmbeddingConfig,
    lift: Lift,
    /// Row scaling `D` applied to the regressor.
    pub scale: Vec<f64>,
    /// `A_Υ` ((p+L)×(p+m+L)), `A_N` (p×(p+m+L)) or `A_R` (p×ζ), acting on scaled coordinates.
    pub operator: Mat<f64>,
    pub pod: Option<PodBasis>,
    /// Mean squared one-step residual over training data and observables.
    pub residual_variance: f64,
    pub pinv_tol: f64,
    sensing: Mat<f64>,
}

impl KoopmanModel {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        mode: FitMode,
        dt: f64,
        n_obs: usize,
        n_inputs: usize,
        embedding: EmbeddingConfig,
        lift_spec: LiftSpec,
        scale: Vec<f64>,
        operator: Mat<f64>,
        pod: Option<PodBasis>,
        residual_variance: f64,
        pinv_tol: f64,
    ) -> Result<Self> {
        embedding.validate()?;
        let lift = lift_spec.compile(n_obs, embedding.dim(n_obs, n_inputs))?;
        let n_reg = n_obs + n_inputs + lift.dim();
        if scale.len() != n_reg {
            return Err(Error::Data(format!("scale has {} entries, regressor has {n_reg}", scale.len())));
        }
        let sensing = match mode {
            FitMode::LinearFull => {
                if operator.nrows() != n_obs + lift.dim() || operator.ncols() != n_reg {
                    return Err(Error::Data("linear operator has inconsistent shape".into()));
                }
                operator.get(..n_obs, ..).to_owned()
            }
            FitMode::NonlinearFull => {
                if operator.nrows() != n_obs || operator.ncols() != n_reg {
                    return Err(Error::Data("nonlinear operator has inconsistent shape".into()));
                }
                operator.clone()
            }
            FitMode::NonlinearPod => {
                let pod = pod
                    .as_ref()
                    .ok_or_else(|| Error::Data("POD model is missing its basis".into()))?;
                if pod.phi.nrows() != n_reg || operator.nrows() != n_obs || operator.ncols() != pod.n_modes() {
                    return Err(Error::Data("reduced operator and POD basis have inconsistent shapes".into()));
                }
                &operator * pod.phi.transpose()
            }
        };
        Ok(Self {
            mode,
            dt,
            n_obs,
            n_inputs,
            embedding,
            lift,
            scale,
            operator,
            pod,
            residual_variance,
            pinv_tol,
            sensing,
        })
    }

    pub fn lift(&self) -> &Lift {
        &self.lift
    }

    pub fn lift_spec(&self) -> &LiftSpec {
        self.lift.spec()
    }

    pub fn lift_dim(&self) -> usize {
        self.lift.dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.dim(self.n_obs, self.n_inputs)
    }

    pub fn regressor_dim(&self) -> usize {
        self.n_obs + self.n_inputs + self.lift.dim()
    }

    /// The `p × (p+m+L)` matrix mapping a scaled regressor to the next observable
    /// (`A_R·Φᵀ` for POD models).
    pub fn sensing(&self) -> MatRef<'_, f64> {
        self.sensing.as_ref()
    }

    /// The operator acting on the unscaled regressor, `sensing · D`.
    pub fn effective_operator(&self) -> Mat<f64> {
        Mat::from_fn(self.n_obs, self.regressor_dim(), |i, j| self.sensing[(i, j)] * self.scale[j])
    }

    /// `[g; u; υ]` with `υ = f_lift(g, h)`.
    pub fn regressor(&self, g: &[f64], u: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.n_inputs {
            return Err(Error::InvalidArgument(format!("expected {} inputs, got {}", self.n_inputs, u.len())));
        }
        let mut r = Vec::with_capacity(self.regressor_dim());
        r.extend_from_slice(g);
        r.extend_from_slice(u);
        r.extend(self.lift.evaluate(g, h)?);
        Ok(r)
    }

    pub fn scale_regressor(&self, r: &mut [f64]) {
        for (x, s) in r.iter_mut().zip(&self.scale) {
            *x *= s;
        }
    }

    /// Next observable from a scaled regressor.
    pub fn predict_scaled(&self, r_scaled: &[f64]) -> Vec<f64> {
        mat_vec(self.sensing.as_ref(), r_scaled)
    }

    /// Next lifted features under the linear model; `None` for nonlinear modes.
    pub fn predict_lifted_linear(&self, r_scaled: &[f64]) -> Option<Vec<f64>> {
        match self.mode {
            FitMode::LinearFull => Some(mat_vec(self.operator.get(self.n_obs.., ..), r_scaled)),
            _ => None,
        }
    }
}

/// Fits the chosen estimator to `data`.
pub fn fit_model(data: &TimeSeriesData, cfg: &EmbeddingConfig, spec: &LiftSpec, opts: &FitOptions) -> Result<KoopmanModel> {
    opts.validate()?;
    data.validate()?;
    let p = data.n_observables();
    let m = data.n_inputs();
    let lift = spec.compile(p, cfg.dim(p, m))?;
    let snaps = assemble_snapshots(data, cfg, &lift)?;
    let mut reg = snaps.regressor();
    let n_reg = reg.nrows();
    let n = reg.ncols();
    if reg.norm_max() == 0.0 {
        return Err(Error::Data("regressor matrix is identically zero".into()));
    }
    if !reg.norm_max().is_finite() {
        return Err(Error::Data("regressor contains non-finite values".into()));
    }

    let scale: Vec<f64> = (0..n_reg)
        .map(|i| {
            if !opts.normalize {
                return 1.0;
            }
            let ms = reg.row(i).iter().map(|v| v * v).sum::<f64>() / n as f64;
            if ms > 0.0 {
                1.0 / ms.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for j in 0..n {
        for i in 0..n_reg {
            reg[(i, j)] *= scale[i];
        }
    }

    let svd = ThinSvd::new(reg.as_ref(), opts.pinv_tol)?;
    let (operator, pod) = match opts.mode {
        FitMode::LinearFull => {
            let target = crate::linalg::vstack(&[snaps.x_plus.as_ref(), snaps.upsilon_plus()]);
            (svd.right_solve(target.as_ref()), None)
        }
        FitMode::NonlinearFull => (svd.right_solve(snaps.x_plus.as_ref()), None),
        FitMode::NonlinearPod => {
            let pod = PodBasis::from_svd(&svd, opts.zeta.expect("validated"))?;
            let projected = pod.phi.transpose() * &reg;
            let a_r = crate::linalg::lstsq_right(snaps.x_plus.as_ref(), projected.as_ref(), opts.pinv_tol)?;
            (a_r, Some(pod))
        }
    };

    let mut model = KoopmanModel::from_parts(
        opts.mode,
        data.dt,
        p,
        m,
        *cfg,
        spec.clone(),
        scale,
        operator,
        pod,
        0.0,
        opts.pinv_tol,
    )?;
    let pred = model.sensing() * &reg;
    let diff = &pred - &snaps.x_plus;
    let sq = diff.norm_l2();
    model.residual_variance = sq * sq / (p * n) as f64;
    Ok(model)
}
