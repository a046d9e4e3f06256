//! Config-driven steps: produce a trajectory, fit a model, roll it out, compute FTLEs.

use crate::error::{Error, Result};
use crate::io::{ingest_csv_file, project_pod_observables, CsvOptions, PipelineConfig, SystemKind};
use crate::koopman::{fit_model, rbf_random, KoopmanModel, LiftKind, LiftSpec};
use crate::predictor::{rollout_from, Rollout};
use crate::series::TimeSeriesData;
use crate::sim::{compute_ftle, simulate_hopf, simulate_neuron, FtleSeries};

/// Trajectory described by the config: a simulation with burn-in removed, or an ingested
/// snapshot file (optionally reduced to POD coefficients).
pub fn produce_trajectory(cfg: &PipelineConfig) -> Result<TimeSeriesData> {
    match cfg.system {
        SystemKind::Neuron | SystemKind::Hopf => {
            let s = cfg
                .simulation
                .as_ref()
                .ok_or_else(|| Error::Config("missing [simulation] table".into()))?;
            let burn = s.burn_in_steps();
            let total = burn + s.n_steps();
            let full = if cfg.system == SystemKind::Neuron {
                let params = s.neuron.unwrap_or_default();
                let input = s.input;
                simulate_neuron(
                    &params,
                    s.neuron_x0.unwrap_or_default(),
                    &move |t| input.value(t),
                    s.dt,
                    total,
                    s.substeps,
                )?
            } else {
                let params = s.hopf.unwrap_or_default();
                simulate_hopf(&params, s.hopf_x0.unwrap_or_default(), s.dt, total, s.seed)?
            };
            full.slice(burn, full.len())
        }
        SystemKind::External => {
            let ext = cfg
                .external
                .as_ref()
                .ok_or_else(|| Error::Config("missing [external] table".into()))?;
            let snaps = ingest_csv_file(&ext.path, CsvOptions::default())?;
            match ext.pod_modes {
                Some(n) => Ok(project_pod_observables(&snaps, n)?.series),
                None => {
                    let mut d = TimeSeriesData::new(snaps.dt, snaps.snapshots, snaps.inputs)?;
                    d.t0 = snaps.t0;
                    d.observable_names = snaps.names;
                    d.input_names = snaps.input_names;
                    Ok(d)
                }
            }
        }
    }
}

/// The lift spec with RBF centers filled in from the `[rbf]` sampling table when needed.
pub fn resolve_lift(cfg: &PipelineConfig) -> Result<LiftSpec> {
    let mut spec = cfg.lift.clone();
    if spec.kind == LiftKind::RbfThenPolynomial && spec.rbf_centers.is_empty() {
        let r = cfg
            .rbf
            .as_ref()
            .ok_or_else(|| Error::Config("RBF lift needs centers or an [rbf] table".into()))?;
        let ranges: Vec<(f64, f64)> = r.ranges.iter().map(|&[lo, hi]| (lo, hi)).collect();
        spec.rbf_centers = rbf_random(spec.rbf_count, &ranges, r.seed)?;
    }
    Ok(spec)
}

/// Fits on samples `0..=uq.start` of `data`.
pub fn fit_from_config(cfg: &PipelineConfig, data: &TimeSeriesData) -> Result<KoopmanModel> {
    let end = cfg.uq.start + 1;
    if data.len() < end {
        return Err(Error::Data(format!(
            "trajectory has {} samples, training needs {end}",
            data.len()
        )));
    }
    let spec = resolve_lift(cfg)?;
    if spec.kind == LiftKind::RbfThenPolynomial && spec.rbf_centers.iter().any(|c| c.len() != data.n_observables()) {
        return Err(Error::Config(format!(
            "RBF centers must have one coordinate per observable ({})",
            data.n_observables()
        )));
    }
    fit_model(&data.slice(0, end)?, &cfg.embedding, &spec, &cfg.fit)
}

/// Rollout of `uq.horizon` steps from the hand-off sample.
pub fn predict_from_config(cfg: &PipelineConfig, model: &KoopmanModel, data: &TimeSeriesData) -> Result<Rollout> {
    rollout_from(model, data, cfg.uq.start, cfg.uq.horizon, &cfg.uq.rollout)
}

/// FTLE along a neuron trajectory; other systems have no Jacobian source.
pub fn ftle_from_config(cfg: &PipelineConfig, data: &TimeSeriesData) -> Result<FtleSeries> {
    if cfg.system != SystemKind::Neuron {
        return Err(Error::Config("FTLE diagnostics are available for the neuron system only".into()));
    }
    if data.states.as_ref().map_or(true, |s| s.nrows() != 4) {
        return Err(Error::Data("FTLE needs the full neuron state history".into()));
    }
    let params = cfg.simulation.as_ref().and_then(|s| s.neuron).unwrap_or_default();
    let window = cfg.ftle.window.unwrap_or(cfg.uq.batch_len as f64 * data.dt);
    compute_ftle(&params, data, window, &cfg.ftle.selector)
}

/// Largest FTLE inside each batch `[start + t0 + 1, start + t0 + len]`, sample-aligned.
pub fn batch_max_ftle(ftle: &FtleSeries, data: &TimeSeriesData, start: usize, t0s: &[usize], len: usize) -> Vec<f64> {
    let first = ftle.times.first().map_or(0.0, |&t| t);
    let offset = ((first - data.t0) / data.dt).round() as usize;
    t0s.iter()
        .map(|&t0| {
            (start + t0 + 1..=start + t0 + len)
                .filter(|&k| k >= offset && k - offset < ftle.lambda.len())
                .map(|k| ftle.lambda[k - offset])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}
