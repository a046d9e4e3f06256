//! Rolling a fitted model forward and slicing the rollout into prediction batches.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koopman::{build_delay_embedding, DelayBuffer, FitMode, KoopmanModel};
use crate::series::TimeSeriesData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    /// Predictions feed back into the delay buffer.
    #[default]
    ClosedLoop,
    /// The buffer and observable are re-seeded from the reference series every step.
    TeacherForced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutOptions {
    #[serde(default)]
    pub mode: RolloutMode,
    /// Closed-loop only: re-seed from the reference every this many steps.
    #[serde(default)]
    pub resync_period: Option<usize>,
}

/// `(g, h, υ)` at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutState {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub dt: f64,
    /// Time of column 0 of `predictions`.
    pub t_start: f64,
    /// Index of the hand-off sample in the warmup series.
    pub start_index: usize,
    /// `p × (n_steps + 1)`; column 0 is the last warmup observable, column `j` the prediction `j` steps later.
    pub predictions: Mat<f64>,
    /// Inputs applied at each step, `m × n_steps`.
    pub inputs: Mat<f64>,
    /// Scaled regressors `D·[g; u; υ]`, `(p+m+L) × n_steps`; column `j` produces prediction `j + 1`.
    pub regressors: Mat<f64>,
    /// States at steps `0..=n_steps`.
    pub states: Vec<RolloutState>,
}

impl Rollout {
    pub fn n_steps(&self) -> usize {
        self.regressors.ncols()
    }

    /// Predicted trajectory as a series (inputs padded with the last applied value).
    pub fn to_series(&self) -> Result<TimeSeriesData> {
        let n = self.n_steps();
        let m = self.inputs.nrows();
        let inputs = Mat::from_fn(m, n + 1, |i, j| {
            if n == 0 {
                0.0
            } else {
                self.inputs[(i, j.min(n - 1))]
            }
        });
        let mut s = TimeSeriesData::new(self.dt, self.predictions.clone(), inputs)?;
        s.t0 = self.t_start;
        Ok(s)
    }
}

fn check_finite(v: &[f64], step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::RolloutDiverged { step })
    }
}

/// Rolls `model` forward `n_steps` from the last sample of `warmup`.
///
/// `input` holds `u` for each step (`m × n_steps`). `reference` is a series indexed like
/// `warmup` that must extend `n_steps` past the hand-off; it is required for teacher forcing
/// and re-synchronization.
pub fn rollout(
    model: &KoopmanModel,
    warmup: &TimeSeriesData,
    input: MatRef<'_, f64>,
    n_steps: usize,
    opts: &RolloutOptions,
    reference: Option<&TimeSeriesData>,
) -> Result<Rollout> {
    let p = model.n_obs;
    let m = model.n_inputs;
    let z = model.embedding.delays;
    if warmup.n_observables() != p || warmup.n_inputs() != m {
        return Err(Error::InvalidArgument(format!(
            "warmup has {} observables / {} inputs, model expects {p} / {m}",
            warmup.n_observables(),
            warmup.n_inputs()
        )));
    }
    if warmup.len() < z + 1 {
        return Err(Error::InsufficientHistory {
            index: warmup.len().saturating_sub(1),
            needed: z,
        });
    }
    if input.nrows() != m || input.ncols() < n_steps {
        return Err(Error::InvalidArgument(format!(
            "input must be {m} × at least {n_steps}, got {} × {}",
            input.nrows(),
            input.ncols()
        )));
    }
    if opts.resync_period == Some(0) {
        return Err(Error::InvalidArgument("resync period must be at least 1".into()));
    }
    let k0 = warmup.len() - 1;
    let needs_ref = opts.mode == RolloutMode::TeacherForced || opts.resync_period.is_some();
    if needs_ref {
        let r = reference.ok_or_else(|| Error::InvalidArgument("reference series required for re-seeding".into()))?;
        if r.len() < k0 + n_steps + 1 || r.n_observables() != p || r.n_inputs() != m {
            return Err(Error::InvalidArgument("reference series does not cover the rollout".into()));
        }
    }

    let lift = model.lift();
    let n_reg = model.regressor_dim();
    let mut g = warmup.observable(k0);
    let mut buf = DelayBuffer::from_embedding(build_delay_embedding(warmup, &model.embedding, k0)?, p, m, z)?;
    let mut scratch = Vec::new();
    let mut upsilon = vec![0.0; lift.dim()];
    lift.evaluate_into(&g, buf.as_slice(), &mut scratch, &mut upsilon)?;

    let mut predictions = Mat::zeros(p, n_steps + 1);
    let mut inputs = Mat::zeros(m, n_steps);
    let mut regressors = Mat::zeros(n_reg, n_steps);
    let mut states = Vec::with_capacity(n_steps + 1);
    for (i, &v) in g.iter().enumerate() {
        predictions[(i, 0)] = v;
    }
    let mut r = vec![0.0; n_reg];
    for j in 0..n_steps {
        let k = k0 + j;
        let reseed = j > 0
            && match (opts.mode, opts.resync_period) {
                (RolloutMode::TeacherForced, _) => true,
                (RolloutMode::ClosedLoop, Some(period)) => j % period == 0,
                _ => false,
            };
        if reseed {
            let truth = reference.expect("checked above");
            g = truth.observable(k);
            buf = DelayBuffer::from_embedding(build_delay_embedding(truth, &model.embedding, k)?, p, m, z)?;
            lift.evaluate_into(&g, buf.as_slice(), &mut scratch, &mut upsilon)?;
        }
        states.push(RolloutState {
            h: buf.as_slice().to_vec(),
            g: g.clone(),
            upsilon: upsilon.clone(),
            k,
        });
        let u: Vec<f64> = input.col(j).iter().copied().collect();
        r[..p].copy_from_slice(&g);
        r[p..p + m].copy_from_slice(&u);
        r[p + m..].copy_from_slice(&upsilon);
        model.scale_regressor(&mut r);
        check_finite(&r, j)?;
        let next = model.predict_scaled(&r);
        check_finite(&next, j + 1)?;
        for (i, &v) in r.iter().enumerate() {
            regressors[(i, j)] = v;
        }
        for (i, &v) in u.iter().enumerate() {
            inputs[(i, j)] = v;
        }
        for (i, &v) in next.iter().enumerate() {
            predictions[(i, j + 1)] = v;
        }
        buf.push(&g, &u);
        let lifted_next = match model.mode {
            FitMode::LinearFull => model.predict_lifted_linear(&r),
            _ => None,
        };
        g = next;
        match lifted_next {
            Some(v) => upsilon = v,
            None => lift.evaluate_into(&g, buf.as_slice(), &mut scratch, &mut upsilon)?,
        }
        check_finite(&upsilon, j + 1)?;
    }
    states.push(RolloutState {
        h: buf.as_slice().to_vec(),
        g,
        upsilon,
        k: k0 + n_steps,
    });
    Ok(Rollout {
        dt: warmup.dt,
        t_start: warmup.time(k0),
        start_index: k0,
        predictions,
        inputs,
        regressors,
        states,
    })
}

/// Rolls forward from sample `start` of `data`, using `data` for warmup, inputs and reference.
pub fn rollout_from(
    model: &KoopmanModel,
    data: &TimeSeriesData,
    start: usize,
    n_steps: usize,
    opts: &RolloutOptions,
) -> Result<Rollout> {
    if start >= data.len() {
        return Err(Error::InvalidArgument(format!("start index {start} past end of series (length {})", data.len())));
    }
    let warmup = data.slice(0, start + 1)?;
    let reseeds = opts.mode == RolloutMode::TeacherForced || opts.resync_period.is_some();
    let input = if data.n_inputs() == 0 && !reseeds {
        Mat::zeros(0, n_steps)
    } else {
        if start + n_steps >= data.len() {
            return Err(Error::InvalidArgument(format!(
                "rollout of {n_steps} steps from index {start} runs past the series (length {})",
                data.len()
            )));
        }
        data.inputs.get(.., start..start + n_steps).to_owned()
    };
    let mut out = rollout(model, &warmup, input.as_ref(), n_steps, opts, Some(data))?;
    out.t_start = data.time(start);
    Ok(out)
}

/// Matched `(Y, X)` pairs over a window of the rollout.
#[derive(Debug, Clone)]
pub struct PredictionBatch {
    /// `p × T`: column `j` is the prediction at step `t0 + j + 1`.
    pub y: Mat<f64>,
    /// Regressor stacks (scaled), column `j` at step `t0 + j`.
    pub x: Mat<f64>,
    pub t0: usize,
}

impl PredictionBatch {
    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.ncols() == 0
    }
}

/// Number of windows of length `len` at `stride` over `n` steps.
pub fn batch_count(n: usize, len: usize, stride: usize) -> usize {
    if len == 0 || stride == 0 || len > n {
        0
    } else {
        (n - len) / stride + 1
    }
}

pub fn make_batches(rollout: &Rollout, batch_len: usize, stride: usize) -> Result<Vec<PredictionBatch>> {
    if batch_len == 0 || stride == 0 {
        return Err(Error::InvalidArgument("batch length and stride must be at least 1".into()));
    }
    let n = rollout.n_steps();
    if batch_len > n {
        return Err(Error::InvalidArgument(format!("batch length {batch_len} exceeds rollout length {n}")));
    }
    Ok((0..batch_count(n, batch_len, stride))
        .map(|b| {
            let t0 = b * stride;
            PredictionBatch {
                y: rollout.predictions.get(.., t0 + 1..t0 + 1 + batch_len).to_owned(),
                x: rollout.regressors.get(.., t0..t0 + batch_len).to_owned(),
                t0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koopman::{fit_model, EmbeddingConfig, FitOptions, LiftSpec};

    fn contraction_model() -> KoopmanModel {
        let obs = Mat::from_fn(1, 30, |_, k| 0.5f64.powi(k as i32));
        let d = TimeSeriesData::autonomous(1.0, obs).unwrap();
        fit_model(
            &d,
            &EmbeddingConfig { delays: 1 },
            &LiftSpec::none(),
            &FitOptions::new(FitMode::NonlinearFull),
        )
        .unwrap()
    }

    #[test]
    fn scalar_contraction_halves() {
        let m = contraction_model();
        let warm = TimeSeriesData::autonomous(1.0, Mat::from_fn(1, 2, |_, k| 2.0 - k as f64)).unwrap();
        let r = rollout(&m, &warm, Mat::zeros(0, 4).as_ref(), 4, &RolloutOptions::default(), None).unwrap();
        let expected = [1.0, 0.5, 0.25, 0.125, 0.0625];
        for (j, e) in expected.iter().enumerate() {
            assert!((r.predictions[(0, j)] - e).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_steps_returns_warmup_tail() {
        let m = contraction_model();
        let warm = TimeSeriesData::autonomous(1.0, Mat::from_fn(1, 3, |_, k| k as f64 + 1.0)).unwrap();
        let r = rollout(&m, &warm, Mat::zeros(0, 0).as_ref(), 0, &RolloutOptions::default(), None).unwrap();
        assert_eq!(r.n_steps(), 0);
        assert_eq!(r.states.len(), 1);
        assert_eq!(r.states[0].g, vec![3.0]);
        assert_eq!(r.states[0].h, vec![2.0]);
    }

    #[test]
    fn insufficient_warmup_is_rejected() {
        let m = contraction_model();
        let warm = TimeSeriesData::autonomous(1.0, Mat::from_fn(1, 1, |_, _| 1.0)).unwrap();
        assert!(rollout(&m, &warm, Mat::zeros(0, 1).as_ref(), 1, &RolloutOptions::default(), None).is_err());
    }

    fn fake_rollout(n: usize) -> Rollout {
        Rollout {
            dt: 1.0,
            t_start: 0.0,
            start_index: 0,
            predictions: Mat::from_fn(1, n + 1, |_, j| j as f64),
            inputs: Mat::zeros(0, n),
            regressors: Mat::from_fn(2, n, |i, j| (10 * i + j) as f64),
            states: Vec::new(),
        }
    }

    #[test]
    fn batch_counts() {
        let r = fake_rollout(10);
        assert_eq!(make_batches(&r, 5, 5).unwrap().len(), 2);
        assert_eq!(make_batches(&r, 10, 10).unwrap().len(), 1);
        assert_eq!(make_batches(&r, 5, 1).unwrap().len(), 6);
        assert!(make_batches(&r, 11, 1).is_err());
    }

    #[test]
    fn batch_columns_are_aligned() {
        let r = fake_rollout(10);
        let b = &make_batches(&r, 3, 2).unwrap()[2];
        assert_eq!(b.t0, 4);
        assert_eq!(b.y[(0, 0)], 5.0);
        assert_eq!(b.x[(0, 0)], 4.0);
        assert_eq!(b.x[(1, 2)], 16.0);
    }
}
