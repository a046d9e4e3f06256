use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeriesData;

/// Time-delay embedding of observables and inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Delay length `z`.
    pub delays: usize,
}

impl EmbeddingConfig {
    pub fn new(delays: usize) -> Result<Self> {
        let cfg = Self { delays };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays == 0 {
            return Err(Error::InvalidArgument("delay length must be at least 1".into()));
        }
        Ok(())
    }

    /// `M = z·(p + m)`.
    pub fn dim(&self, n_obs: usize, n_inputs: usize) -> usize {
        self.delays * (n_obs + n_inputs)
    }
}

/// `hᵏ = [g(x^{k−1}); …; g(x^{k−z}); u^{k−1}; …; u^{k−z}]`.
pub fn build_delay_embedding(data: &TimeSeriesData, cfg: &EmbeddingConfig, k: usize) -> Result<Vec<f64>> {
    let z = cfg.delays;
    if k < z {
        return Err(Error::InsufficientHistory { index: k, needed: z });
    }
    if k > data.len() {
        return Err(Error::InvalidArgument(format!("index {k} past end of series of length {}", data.len())));
    }
    let p = data.n_observables();
    let m = data.n_inputs();
    let mut h = Vec::with_capacity(cfg.dim(p, m));
    for d in 1..=z {
        h.extend(data.observables.col(k - d).iter().copied());
    }
    for d in 1..=z {
        h.extend(data.inputs.col(k - d).iter().copied());
    }
    Ok(h)
}

/// Sliding delay buffer that maintains `hᵏ` incrementally as new samples arrive.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBuffer {
    n_obs: usize,
    n_inputs: usize,
    delays: usize,
    h: Vec<f64>,
}

impl DelayBuffer {
    pub fn from_embedding(h: Vec<f64>, n_obs: usize, n_inputs: usize, delays: usize) -> Result<Self> {
        if h.len() != delays * (n_obs + n_inputs) {
            return Err(Error::InvalidArgument(format!(
                "embedding has {} entries, expected {}",
                h.len(),
                delays * (n_obs + n_inputs)
            )));
        }
        Ok(Self {
            n_obs,
            n_inputs,
            delays,
            h,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.h
    }

    /// Advances `hᵏ → h^{k+1}` by pushing `g(xᵏ)` and `uᵏ` to the front of their blocks.
    pub fn push(&mut self, g: &[f64], u: &[f64]) {
        debug_assert_eq!(g.len(), self.n_obs);
        debug_assert_eq!(u.len(), self.n_inputs);
        let gb = self.n_obs * self.delays;
        if self.n_obs > 0 {
            self.h.copy_within(0..gb - self.n_obs, self.n_obs);
            self.h[..self.n_obs].copy_from_slice(g);
        }
        if self.n_inputs > 0 {
            let ub = self.n_inputs * self.delays;
            self.h.copy_within(gb..gb + ub - self.n_inputs, gb + self.n_inputs);
            self.h[gb..gb + self.n_inputs].copy_from_slice(u);
        }
    }
}
