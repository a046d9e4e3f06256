//! The VAMP loop: MMSE denoising under the prior alternating with LMMSE estimation under the
//! measurement model, exchanging extrinsic Gaussian messages.

use serde::{Deserialize, Serialize};

use super::prior::{denoise_mmse, PriorSpec};
use super::sensing::{lmmse_estimate, LmmsePath, SensingModel};
use crate::error::{Error, Result};
use crate::linalg::norm2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VampOptions {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Convex-combination weight on freshly computed extrinsic messages; 1 disables damping.
    #[serde(default = "default_damping")]
    pub damping: f64,
    /// Relative change of the posterior mean below which iteration stops.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Extrinsic precisions are clipped from below at this value.
    #[serde(default = "default_floor")]
    pub precision_floor: f64,
    #[serde(default)]
    pub path: LmmsePath,
}

fn default_max_iters() -> usize {
    50
}
fn default_damping() -> f64 {
    0.9
}
fn default_tol() -> f64 {
    1e-8
}
fn default_floor() -> f64 {
    1e-11
}

impl Default for VampOptions {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            damping: default_damping(),
            tol: default_tol(),
            precision_floor: default_floor(),
            path: LmmsePath::default(),
        }
    }
}

impl VampOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol >= 0.0) || !(self.precision_floor > 0.0) {
            return Err(Error::InvalidArgument("tol must be ≥ 0 and precision_floor > 0".into()));
        }
        Ok(())
    }
}

/// Messages exchanged across the `δ(x⁺ − x⁻)` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct VampState {
    /// Extrinsic message into the denoiser.
    pub x_e_plus: Vec<f64>,
    pub gamma_e_plus: f64,
    /// Extrinsic message into the LMMSE stage (`None` before the first denoiser pass).
    pub x_e_minus: Option<Vec<f64>>,
    pub gamma_e_minus: f64,
    pub iteration: usize,
}

impl VampState {
    /// Starts from the prior: mean vector at the prior mean, precision at its inverse variance.
    pub fn from_prior(prior: &PriorSpec, n: usize) -> Self {
        Self {
            x_e_plus: vec![prior.marginal_mean(); n],
            gamma_e_plus: 1.0 / prior.marginal_variance(),
            x_e_minus: None,
            gamma_e_minus: 0.0,
            iteration: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Denoiser posterior precision `γ_p⁺`.
    pub gamma_post_plus: f64,
    /// LMMSE posterior precision `γ_p⁻`.
    pub gamma_post_minus: f64,
    pub gamma_ext_plus: f64,
    pub gamma_ext_minus: f64,
    pub alpha: f64,
    /// Relative change of the denoiser posterior mean.
    pub change: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone)]
pub struct VampResult {
    pub x_hat: Vec<f64>,
    pub posterior_variance: f64,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_run: usize,
}

/// Gaussian message division: `N(x̂_p, 1/γ_p) / N(x̂_in, 1/γ_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsic {
    pub gamma: f64,
    pub mean: Vec<f64>,
    pub clipped: bool,
}

/// `γ_out = γ_p − γ_in`, `x̂_out = (γ_p·x̂_p − γ_in·x̂_in)/γ_out`; precision clipped at `floor`.
///
/// The mean uses the unclipped precision whenever that is non-zero, so clipping only widens
/// the outgoing message.
pub fn extrinsic_update(gamma_p: f64, x_hat_p: &[f64], gamma_in: f64, x_hat_in: &[f64], floor: f64) -> Result<Extrinsic> {
    if !(gamma_p > 0.0) || !(gamma_in > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "precisions must be positive (γ_p = {gamma_p}, γ_in = {gamma_in})"
        )));
    }
    if x_hat_p.len() != x_hat_in.len() {
        return Err(Error::InvalidArgument("mean vectors differ in length".into()));
    }
    let raw = gamma_p - gamma_in;
    let mean = if raw != 0.0 {
        x_hat_p
            .iter()
            .zip(x_hat_in)
            .map(|(&p, &i)| (gamma_p * p - gamma_in * i) / raw)
            .collect()
    } else {
        x_hat_p.to_vec()
    };
    let clipped = raw < floor;
    Ok(Extrinsic {
        gamma: if clipped { floor } else { raw },
        mean,
        clipped,
    })
}

fn damp(new: Extrinsic, old_mean: &[f64], old_gamma: f64, beta: f64) -> Extrinsic {
    if beta >= 1.0 {
        return new;
    }
    let mean = new
        .mean
        .iter()
        .zip(old_mean)
        .map(|(&n, &o)| beta * n + (1.0 - beta) * o)
        .collect();
    Extrinsic {
        gamma: beta * new.gamma + (1.0 - beta) * old_gamma,
        mean,
        clipped: new.clipped,
    }
}

/// Output of one denoise → extrinsic → LMMSE → extrinsic sweep.
#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub x_hat_plus: Vec<f64>,
    pub gamma_post_plus: f64,
    pub x_hat_minus: Vec<f64>,
    pub gamma_post_minus: f64,
    pub alpha: f64,
    pub clipped: bool,
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Advances `state` by one VAMP iteration.
pub fn vamp_iterate(
    model: &SensingModel,
    y: &[f64],
    prior: &PriorSpec,
    opts: &VampOptions,
    state: &mut VampState,
) -> Result<IterationOutput> {
    let den = denoise_mmse(prior, &state.x_e_plus, state.gamma_e_plus)?;
    let ext_minus = extrinsic_update(
        den.gamma_post,
        &den.mean,
        state.gamma_e_plus,
        &state.x_e_plus,
        opts.precision_floor,
    )?;
    let ext_minus = match &state.x_e_minus {
        Some(old) => damp(ext_minus, old, state.gamma_e_minus, opts.damping),
        None => ext_minus,
    };
    let (x_minus, gamma_minus) = lmmse_estimate(model, y, &ext_minus.mean, ext_minus.gamma, opts.path)?;
    let ext_plus = extrinsic_update(gamma_minus, &x_minus, ext_minus.gamma, &ext_minus.mean, opts.precision_floor)?;
    let ext_plus = damp(ext_plus, &state.x_e_plus, state.gamma_e_plus, opts.damping);

    let clipped = ext_minus.clipped || ext_plus.clipped;
    state.gamma_e_minus = ext_minus.gamma;
    state.x_e_minus = Some(ext_minus.mean);
    state.gamma_e_plus = ext_plus.gamma;
    state.x_e_plus = ext_plus.mean;
    state.iteration += 1;
    Ok(IterationOutput {
        x_hat_plus: den.mean,
        gamma_post_plus: den.gamma_post,
        x_hat_minus: x_minus,
        gamma_post_minus: gamma_minus,
        alpha: den.alpha,
        clipped,
    })
}

/// Runs VAMP from the prior-initialized state (or `init`) until `max_iters` or convergence.
pub fn vamp_solve(model: &SensingModel, y: &[f64], prior: &PriorSpec, opts: &VampOptions) -> Result<VampResult> {
    vamp_solve_from(model, y, prior, opts, VampState::from_prior(prior, model.n_unknowns()))
}

pub fn vamp_solve_from(
    model: &SensingModel,
    y: &[f64],
    prior: &PriorSpec,
    opts: &VampOptions,
    mut state: VampState,
) -> Result<VampResult> {
    opts.validate()?;
    prior.validate()?;
    if y.len() != model.n_measurements() || state.x_e_plus.len() != model.n_unknowns() {
        return Err(Error::InvalidArgument("measurement or initial message has the wrong length".into()));
    }
    let mut trace = Vec::with_capacity(opts.max_iters);
    let mut prev: Option<Vec<f64>> = None;
    let mut last: Option<(Vec<f64>, f64)> = None;
    let mut converged = false;
    for it in 0..opts.max_iters {
        let out = match vamp_iterate(model, y, prior, opts, &mut state) {
            Ok(o) => o,
            Err(Error::InvalidArgument(_)) | Err(Error::Linalg(_)) => {
                return Err(Error::SolverDiverged {
                    iteration: it,
                    batch: None,
                    trace,
                })
            }
            Err(e) => return Err(e),
        };
        let change = match &prev {
            Some(p) => {
                let diff: Vec<f64> = out.x_hat_plus.iter().zip(p).map(|(a, b)| a - b).collect();
                norm2(&diff) / norm2(&out.x_hat_plus).max(f64::MIN_POSITIVE)
            }
            None => f64::INFINITY,
        };
        trace.push(IterationRecord {
            iteration: it,
            gamma_post_plus: out.gamma_post_plus,
            gamma_post_minus: out.gamma_post_minus,
            gamma_ext_plus: state.gamma_e_plus,
            gamma_ext_minus: state.gamma_e_minus,
            alpha: out.alpha,
            change,
            clipped: out.clipped,
        });
        let healthy = finite(&out.x_hat_plus)
            && finite(&state.x_e_plus)
            && state.gamma_e_plus.is_finite()
            && state.gamma_e_minus.is_finite()
            && out.gamma_post_plus.is_finite();
        if !healthy {
            return Err(Error::SolverDiverged {
                iteration: it,
                batch: None,
                trace,
            });
        }
        prev = Some(out.x_hat_plus.clone());
        last = Some((out.x_hat_plus, out.gamma_post_plus));
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let (x_hat, gamma) = last.expect("max_iters ≥ 1");
    let iterations_run = trace.len();
    Ok(VampResult {
        x_hat,
        posterior_variance: 1.0 / gamma,
        trace,
        converged,
        iterations_run,
    })
}
