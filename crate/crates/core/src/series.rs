use faer::Mat;

use crate::error::{Error, Result};

/// Uniformly sampled observables and inputs.
///
/// Matrices are stored channel-by-time: column `k` holds sample `k`.
#[derive(Debug, Clone)]
pub struct TimeSeriesData {
    pub dt: f64,
    /// Time of sample 0.
    pub t0: f64,
    /// `p × q` observables `g(xᵏ)`.
    pub observables: Mat<f64>,
    /// `m × q` inputs `uᵏ` (`m` may be zero).
    pub inputs: Mat<f64>,
    /// Optional full states, `n × q`, kept for diagnostics.
    pub states: Option<Mat<f64>>,
    pub observable_names: Vec<String>,
    pub input_names: Vec<String>,
    pub state_names: Vec<String>,
}

impl TimeSeriesData {
    pub fn new(dt: f64, observables: Mat<f64>, inputs: Mat<f64>) -> Result<Self> {
        let data = Self {
            dt,
            t0: 0.0,
            observable_names: (0..observables.nrows()).map(|i| format!("g{i}")).collect(),
            input_names: (0..inputs.nrows()).map(|i| format!("u{i}")).collect(),
            state_names: Vec::new(),
            observables,
            inputs,
            states: None,
        };
        data.validate()?;
        Ok(data)
    }

    /// Autonomous series (no input channels).
    pub fn autonomous(dt: f64, observables: Mat<f64>) -> Result<Self> {
        let q = observables.ncols();
        Self::new(dt, observables, Mat::zeros(0, q))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Data(format!("sample interval must be positive, got {}", self.dt)));
        }
        if self.observables.nrows() == 0 {
            return Err(Error::Data("at least one observable channel is required".into()));
        }
        if self.inputs.ncols() != self.observables.ncols() {
            return Err(Error::Data(format!(
                "observables have {} samples but inputs have {}",
                self.observables.ncols(),
                self.inputs.ncols()
            )));
        }
        if let Some(s) = &self.states {
            if s.ncols() != self.observables.ncols() {
                return Err(Error::Data("state history length differs from observables".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observables.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_observables(&self) -> usize {
        self.observables.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn observable(&self, k: usize) -> Vec<f64> {
        self.observables.col(k).iter().copied().collect()
    }

    pub fn input(&self, k: usize) -> Vec<f64> {
        self.inputs.col(k).iter().copied().collect()
    }

    /// Samples `start..end` as a new series with the time origin carried along.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} out of range for {} samples",
                self.len()
            )));
        }
        Ok(Self {
            dt: self.dt,
            t0: self.time(start),
            observables: self.observables.get(.., start..end).to_owned(),
            inputs: self.inputs.get(.., start..end).to_owned(),
            states: self.states.as_ref().map(|s| s.get(.., start..end).to_owned()),
            observable_names: self.observable_names.clone(),
            input_names: self.input_names.clone(),
            state_names: self.state_names.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_lengths_are_rejected() {
        let g = Mat::<f64>::zeros(1, 5);
        let u = Mat::<f64>::zeros(1, 4);
        assert!(TimeSeriesData::new(0.1, g, u).is_err());
    }

    #[test]
    fn slice_shifts_time_origin() {
        let g = Mat::from_fn(1, 10, |_, j| j as f64);
        let d = TimeSeriesData::autonomous(0.5, g).unwrap();
        let s = d.slice(4, 8).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.t0, 2.0);
        assert_eq!(s.observable(0), vec![4.0]);
    }
}
