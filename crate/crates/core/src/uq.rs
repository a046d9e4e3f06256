//! Per-batch inverse solves, threshold flags and uncertainty windows.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koopman::KoopmanModel;
use crate::linalg::column;
use crate::predictor::{make_batches, rollout_from, PredictionBatch, Rollout, RolloutOptions};
use crate::series::TimeSeriesData;
use crate::vamp::{vamp_solve, IterationRecord, PriorSpec, SensingModel, VampOptions};

/// Noise precision ceiling used when the training residual vanishes.
const MAX_NOISE_PRECISION: f64 = 1e24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UqConfig {
    pub batch_len: usize,
    /// Offset between consecutive batch starts; defaults to `batch_len`.
    #[serde(default)]
    pub stride: Option<usize>,
    /// Fractions of the prior variance, strictly increasing in `(0, 1)`.
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_prior")]
    pub prior: PriorSpec,
    /// Overrides the residual-based default `γ_w = 1 / residual variance`.
    #[serde(default)]
    pub noise_precision: Option<f64>,
    #[serde(default)]
    pub vamp: VampOptions,
    #[serde(default)]
    pub rollout: RolloutOptions,
    /// Sample index of the hand-off from truth to prediction.
    pub start: usize,
    /// Number of predicted steps.
    pub horizon: usize,
    /// Solve in POD coordinates (`A_R`, `ζ` unknowns) instead of the full regressor.
    #[serde(default)]
    pub projected: bool,
}

fn default_thresholds() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn default_prior() -> PriorSpec {
    PriorSpec::bernoulli_gaussian(0.05)
}

impl UqConfig {
    pub fn new(batch_len: usize, start: usize, horizon: usize) -> Self {
        Self {
            batch_len,
            stride: None,
            thresholds: default_thresholds(),
            prior: default_prior(),
            noise_precision: None,
            vamp: VampOptions::default(),
            rollout: RolloutOptions::default(),
            start,
            horizon,
            projected: false,
        }
    }

    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.batch_len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_len == 0 || self.stride() == 0 {
            return Err(Error::InvalidArgument("batch length and stride must be at least 1".into()));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidArgument("thresholds must lie in (0, 1)".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
        }
        if let Some(g) = self.noise_precision {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidArgument(format!("noise precision must be positive, got {g}")));
            }
        }
        self.prior.validate()?;
        self.vamp.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    /// Step offset of the batch within the rollout.
    pub t0: usize,
    /// Time of the first prediction in the batch.
    pub time: f64,
    pub posterior_variance: f64,
    pub normalized_variance: f64,
    /// One flag per threshold.
    pub flags: Vec<bool>,
    /// Largest prediction error inside the batch, when truth is available.
    pub max_error: Option<f64>,
    /// Columns whose solve hit the iteration cap.
    pub unconverged_columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub batch_size: usize,
    pub threshold: f64,
    pub window_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub batch_len: usize,
    pub stride: usize,
    pub thresholds: Vec<f64>,
    pub prior_variance: f64,
    pub noise_precision: f64,
    pub per_batch: Vec<BatchRecord>,
    /// Times of predictions `1..=horizon`.
    pub step_times: Vec<f64>,
    /// `‖ĝ − g‖₂` per predicted step, when truth covers the horizon.
    pub per_step_error: Option<Vec<f64>>,
    pub window_curve: Vec<WindowPoint>,
}

/// Posterior means and batch variance of one prediction batch.
#[derive(Debug, Clone)]
pub struct BatchSolution {
    pub x_hat: Mat<f64>,
    pub posterior_variance: f64,
    pub unconverged_columns: usize,
}

/// Solves `Y[:, j] = A·X[:, j] + n` independently for every column and averages the variances.
pub fn solve_batch_inverse(
    batch: &PredictionBatch,
    sensing: &SensingModel,
    prior: &PriorSpec,
    opts: &VampOptions,
    batch_index: usize,
) -> Result<BatchSolution> {
    if sensing.n_measurements() != batch.y.nrows() {
        return Err(Error::InvalidArgument(format!(
            "sensing matrix has {} rows, batch has {} observables",
            sensing.n_measurements(),
            batch.y.nrows()
        )));
    }
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = sensing.n_unknowns();
    let mut x_hat = Mat::zeros(n, batch.len());
    let mut var_sum = 0.0;
    let mut unconverged = 0;
    for j in 0..batch.len() {
        let y = column(batch.y.as_ref(), j);
        let res = vamp_solve(sensing, &y, prior, opts).map_err(|e| match e {
            Error::SolverDiverged { iteration, trace, .. } => Error::SolverDiverged {
                iteration,
                batch: Some(batch_index),
                trace,
            },
            other => other,
        })?;
        for (i, &v) in res.x_hat.iter().enumerate() {
            x_hat[(i, j)] = v;
        }
        var_sum += res.posterior_variance;
        if !res.converged {
            unconverged += 1;
        }
    }
    Ok(BatchSolution {
        x_hat,
        posterior_variance: var_sum / batch.len() as f64,
        unconverged_columns: unconverged,
    })
}

/// Default measurement-noise precision from the model's one-step training residual.
pub fn residual_noise_precision(model: &KoopmanModel) -> f64 {
    if model.residual_variance > 0.0 {
        (1.0 / model.residual_variance).min(MAX_NOISE_PRECISION)
    } else {
        MAX_NOISE_PRECISION
    }
}

/// The sensing matrix of the batch inverse problem and the matching transform of `X`.
/// Sensing model for the configured inverse problem, plus the map applied to regressor
/// batches (`Φᵀ` when solving in POD coordinates).
pub fn inverse_problem(model: &KoopmanModel, cfg: &UqConfig) -> Result<(SensingModel, Option<Mat<f64>>)> {
    let gamma_w = cfg.noise_precision.unwrap_or_else(|| residual_noise_precision(model));
    if cfg.projected {
        let pod = model
            .pod
            .as_ref()
            .ok_or_else(|| Error::Config("projected inverse problems need a POD model".into()))?;
        Ok((SensingModel::new(model.operator.clone(), gamma_w)?, Some(pod.phi.transpose().to_owned())))
    } else {
        Ok((SensingModel::new(model.sensing().to_owned(), gamma_w)?, None))
    }
}

/// Percentage of steps covered by batches that fall inside flagged batches.
pub fn uncertainty_window(n_steps: usize, batch_len: usize, starts: &[usize], flagged: &[bool]) -> f64 {
    let mut covered = vec![false; n_steps];
    let mut hot = vec![false; n_steps];
    for (&t0, &f) in starts.iter().zip(flagged) {
        for s in t0..(t0 + batch_len).min(n_steps) {
            covered[s] = true;
            if f {
                hot[s] = true;
            }
        }
    }
    let total = covered.iter().filter(|&&c| c).count();
    if total == 0 {
        return 0.0;
    }
    100.0 * hot.iter().filter(|&&h| h).count() as f64 / total as f64
}

fn prediction_errors(rollout: &Rollout, truth: &TimeSeriesData) -> Option<Vec<f64>> {
    let k0 = rollout.start_index;
    let n = rollout.n_steps();
    if truth.len() < k0 + n + 1 {
        return None;
    }
    Some(
        (1..=n)
            .map(|j| {
                (0..rollout.predictions.nrows())
                    .map(|i| (rollout.predictions[(i, j)] - truth.observables[(i, k0 + j)]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
    )
}

/// Scores an existing rollout at the configured batch length.
pub fn score_rollout(model: &KoopmanModel, rollout: &Rollout, truth: Option<&TimeSeriesData>, cfg: &UqConfig) -> Result<UncertaintyReport> {
    cfg.validate()?;
    let (sensing, transform) = inverse_problem(model, cfg)?;
    let stride = cfg.stride();
    let mut batches = make_batches(rollout, cfg.batch_len, stride)?;
    if let Some(t) = &transform {
        for b in &mut batches {
            b.x = t * &b.x;
        }
    }
    let prior_var = cfg.prior.marginal_variance();
    let errors = truth.and_then(|t| prediction_errors(rollout, t));
    let mut per_batch = Vec::with_capacity(batches.len());
    for (bi, b) in batches.iter().enumerate() {
        let sol = solve_batch_inverse(b, &sensing, &cfg.prior, &cfg.vamp, bi)?;
        let normalized = sol.posterior_variance / prior_var;
        per_batch.push(BatchRecord {
            t0: b.t0,
            time: rollout.t_start + (b.t0 + 1) as f64 * rollout.dt,
            posterior_variance: sol.posterior_variance,
            normalized_variance: normalized,
            flags: cfg.thresholds.iter().map(|&t| normalized > t).collect(),
            max_error: errors
                .as_ref()
                .map(|e| e[b.t0..b.t0 + b.len()].iter().copied().fold(0.0, f64::max)),
            unconverged_columns: sol.unconverged_columns,
        });
    }
    let starts: Vec<usize> = per_batch.iter().map(|r| r.t0).collect();
    let window_curve = cfg
        .thresholds
        .iter()
        .enumerate()
        .map(|(ti, &threshold)| {
            let flagged: Vec<bool> = per_batch.iter().map(|r| r.flags[ti]).collect();
            WindowPoint {
                batch_size: cfg.batch_len,
                threshold,
                window_pct: uncertainty_window(rollout.n_steps(), cfg.batch_len, &starts, &flagged),
            }
        })
        .collect();
    Ok(UncertaintyReport {
        batch_len: cfg.batch_len,
        stride,
        thresholds: cfg.thresholds.clone(),
        prior_variance: prior_var,
        noise_precision: sensing.noise_precision(),
        per_batch,
        step_times: (1..=rollout.n_steps())
            .map(|j| rollout.t_start + j as f64 * rollout.dt)
            .collect(),
        per_step_error: errors,
        window_curve,
    })
}

/// Rollout from `cfg.start`, batching, per-batch VAMP and threshold flags.
pub fn run_uq(model: &KoopmanModel, truth: &TimeSeriesData, cfg: &UqConfig) -> Result<UncertaintyReport> {
    cfg.validate()?;
    let rollout = rollout_from(model, truth, cfg.start, cfg.horizon, &cfg.rollout)?;
    score_rollout(model, &rollout, Some(truth), cfg)
}

/// Uncertainty window per threshold for each batch size, sharing one rollout.
pub fn sweep_batch_sizes(
    model: &KoopmanModel,
    truth: &TimeSeriesData,
    cfg: &UqConfig,
    batch_sizes: &[usize],
) -> Result<Vec<WindowPoint>> {
    if batch_sizes.iter().any(|&b| b == 0) {
        return Err(Error::InvalidArgument("batch sizes must be at least 1".into()));
    }
    cfg.validate()?;
    let rollout = rollout_from(model, truth, cfg.start, cfg.horizon, &cfg.rollout)?;
    let mut out = Vec::new();
    for &bs in batch_sizes {
        let c = UqConfig {
            batch_len: bs,
            ..cfg.clone()
        };
        out.extend(score_rollout(model, &rollout, Some(truth), &c)?.window_curve);
    }
    Ok(out)
}

/// Solver traces for every column of batch `batch_index`, for diagnostics.
pub fn batch_traces(
    model: &KoopmanModel,
    rollout: &Rollout,
    cfg: &UqConfig,
    batch_index: usize,
) -> Result<Vec<(usize, Vec<IterationRecord>)>> {
    cfg.validate()?;
    let (sensing, _) = inverse_problem(model, cfg)?;
    let batches = make_batches(rollout, cfg.batch_len, cfg.stride())?;
    let b = batches.get(batch_index).ok_or_else(|| {
        Error::InvalidArgument(format!("batch {batch_index} out of range ({} batches)", batches.len()))
    })?;
    (0..b.len())
        .map(|j| {
            let y = column(b.y.as_ref(), j);
            vamp_solve(&sensing, &y, &cfg.prior, &cfg.vamp).map(|r| (j, r.trace))
        })
        .collect()
}

/// Largest componentwise residual `|Y − A·X|` relative to `|A|·|X|`, the scale of rounding
/// error in the product; zero entries of `|A|·|X|` count only if the residual is non-zero.
pub fn batch_consistency(a: MatRef<'_, f64>, batch: &PredictionBatch) -> f64 {
    let r = &batch.y - a * &batch.x;
    let abs_a = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].abs());
    let abs_x = Mat::from_fn(batch.x.nrows(), batch.x.ncols(), |i, j| batch.x[(i, j)].abs());
    let scale = &abs_a * &abs_x;
    let mut worst: f64 = 0.0;
    for j in 0..r.ncols() {
        for i in 0..r.nrows() {
            let e = r[(i, j)].abs();
            worst = worst.max(if scale[(i, j)] > 0.0 { e / scale[(i, j)] } else if e > 0.0 { f64::INFINITY } else { 0.0 });
        }
    }
    worst
}
