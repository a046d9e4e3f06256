//! Declarative experiment description read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koopman::{EmbeddingConfig, FitOptions, LiftKind, LiftSpec};
use crate::sim::{HopfParams, HopfState, NeuronParams, NeuronState};
use crate::uq::UqConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Neuron,
    Hopf,
    External,
}

/// Drive applied to the neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSignal {
    Zero,
    /// `6·sin(2πt/200 + 0.0003·t²)`.
    Chirp,
    Constant { value: f64 },
}

impl InputSignal {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            InputSignal::Zero => 0.0,
            InputSignal::Chirp => crate::sim::chirp_input(t),
            InputSignal::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    /// Length of the recorded trajectory (time units).
    pub duration: f64,
    /// Simulated and discarded before recording starts (time units).
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "one")]
    pub substeps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_input")]
    pub input: InputSignal,
    #[serde(default)]
    pub neuron: Option<NeuronParams>,
    #[serde(default)]
    pub neuron_x0: Option<NeuronState>,
    #[serde(default)]
    pub hopf: Option<HopfParams>,
    #[serde(default)]
    pub hopf_x0: Option<HopfState>,
}

fn one() -> usize {
    1
}

fn default_input() -> InputSignal {
    InputSignal::Zero
}

impl SimulationConfig {
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    /// Snapshot CSV, relative paths resolved against the config file.
    pub path: PathBuf,
    /// Reduce snapshots to this many POD coefficients; `None` uses the columns as observables.
    #[serde(default)]
    pub pod_modes: Option<usize>,
}

/// Random RBF centers drawn when `lift.rbf_centers` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbfSampling {
    /// One `[lo, hi]` per observable.
    pub ranges: Vec<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub batch_sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            batch_sizes: vec![5, 10, 20, 50, 100],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtleConfig {
    /// Window `ν`; defaults to one batch, `batch_len·dt`.
    #[serde(default)]
    pub window: Option<f64>,
    /// Observed state indices.
    #[serde(default = "default_selector")]
    pub selector: Vec<usize>,
}

fn default_selector() -> Vec<usize> {
    vec![0, 1]
}

impl Default for FtleConfig {
    fn default() -> Self {
        Self {
            window: None,
            selector: default_selector(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub system: SystemKind,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub external: Option<ExternalConfig>,
    pub embedding: EmbeddingConfig,
    pub lift: LiftSpec,
    #[serde(default)]
    pub rbf: Option<RbfSampling>,
    pub fit: FitOptions,
    /// `uq.start` is the hand-off sample; the model is fitted on samples `0..=start`.
    pub uq: UqConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub ftle: FtleConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(ext), Some(dir)) = (cfg.external.as_mut(), path.parent()) {
            if ext.path.is_relative() {
                ext.path = dir.join(&ext.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self.system {
            SystemKind::Neuron | SystemKind::Hopf => {
                let Some(s) = &self.simulation else {
                    return bad("simulated systems need a [simulation] table".into());
                };
                if !(s.dt > 0.0 && s.dt.is_finite()) || !(s.duration > 0.0) || s.burn_in < 0.0 {
                    return bad("simulation dt and duration must be positive, burn_in non-negative".into());
                }
                if s.substeps == 0 {
                    return bad("simulation substeps must be at least 1".into());
                }
                if self.uq.start + self.uq.horizon > s.n_steps() && self.uq.rollout.resync_period.is_some() {
                    return bad("re-synchronized rollouts must stay inside the simulated trajectory".into());
                }
            }
            SystemKind::External => {
                if self.external.is_none() {
                    return bad("external system needs an [external] table".into());
                }
            }
        }
        self.embedding.validate().map_err(to_config)?;
        if self.lift.kind == LiftKind::RbfThenPolynomial && self.lift.rbf_centers.is_empty() {
            let r = match &self.rbf {
                None => return bad("RBF lift needs explicit centers or an [rbf] sampling table".into()),
                Some(r) if r.ranges.iter().any(|[lo, hi]| !(lo <= hi)) => {
                    return bad("RBF ranges must satisfy lo <= hi".into())
                }
                Some(r) => r,
            };
            let probe = LiftSpec {
                rbf_centers: vec![vec![0.0; r.ranges.len()]; self.lift.rbf_count],
                ..self.lift.clone()
            };
            probe.validate().map_err(to_config)?;
        } else {
            self.lift.validate().map_err(to_config)?;
        }
        self.fit.validate().map_err(to_config)?;
        self.uq.validate().map_err(to_config)?;
        if self.uq.start < self.embedding.delays + 1 {
            return bad(format!(
                "uq.start = {} leaves no training snapshots for {} delays",
                self.uq.start, self.embedding.delays
            ));
        }
        if self.sweep.batch_sizes.is_empty() || self.sweep.batch_sizes.contains(&0) {
            return bad("sweep batch sizes must be non-empty and at least 1".into());
        }
        if let Some(w) = self.ftle.window {
            if !(w > 0.0) {
                return bad("ftle window must be positive".into());
            }
        }
        Ok(())
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}
