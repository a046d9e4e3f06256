//! Finite-time Lyapunov exponents from the variational equation.
//!
//! For each output time `t` the state-transition matrix `Ψ(t, t−ν)` is integrated with
//! RK4 on `dΨ/dt = J(t)·Ψ`, restricted to the observed columns, and
//! `Λ(t) = ln σ_max(Ψ·[e_i …]) / ν`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::neuron::{neuron_jacobian, neuron_rhs, NeuronParams};
use crate::error::{Error, Result};
use crate::linalg::max_singular_value;
use crate::series::TimeSeriesData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtleSeries {
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    pub window: f64,
}

/// A source of Jacobians `J(t)` along a reference trajectory.
pub trait Linearization {
    fn dim(&self) -> usize;
    /// Writes `J(t)` row-major into `out` (length `dim²`).
    fn jacobian(&self, t: f64, out: &mut [f64]);
}

/// Time-independent linear system `dδx/dt = J·δx`.
#[derive(Debug, Clone)]
pub struct ConstantJacobian {
    dim: usize,
    entries: Vec<f64>,
}

impl ConstantJacobian {
    pub fn new(dim: usize, row_major: Vec<f64>) -> Self {
        assert_eq!(row_major.len(), dim * dim);
        Self { dim, entries: row_major }
    }
}

impl Linearization for ConstantJacobian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jacobian(&self, _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.entries);
    }
}

/// Neuron Jacobian along a sampled trajectory; off-grid states come from cubic Hermite
/// interpolation using the vector field at the bracketing samples.
pub struct NeuronLinearization<'a> {
    params: NeuronParams,
    traj: &'a TimeSeriesData,
    states: &'a Mat<f64>,
}

impl<'a> NeuronLinearization<'a> {
    pub fn new(params: NeuronParams, traj: &'a TimeSeriesData) -> Result<Self> {
        let states = traj
            .states
            .as_ref()
            .filter(|s| s.nrows() == 4)
            .ok_or_else(|| Error::InvalidArgument("FTLE needs a neuron trajectory with its 4-D state".into()))?;
        if traj.n_inputs() != 1 {
            return Err(Error::InvalidArgument("neuron trajectory must carry one input channel".into()));
        }
        Ok(Self { params, traj, states })
    }

    fn sample(&self, k: usize) -> [f64; 4] {
        [self.states[(0, k)], self.states[(1, k)], self.states[(2, k)], self.states[(3, k)]]
    }

    fn state_at(&self, t: f64) -> [f64; 4] {
        let dt = self.traj.dt;
        let s = ((t - self.traj.t0) / dt).clamp(0.0, (self.traj.len() - 1) as f64);
        let k = (s.floor() as usize).min(self.traj.len().saturating_sub(2));
        let theta = s - k as f64;
        let x0 = self.sample(k);
        if theta <= 1e-12 {
            return x0;
        }
        let x1 = self.sample(k + 1);
        if theta >= 1.0 - 1e-12 {
            return x1;
        }
        let f0 = neuron_rhs(&self.params, &x0, self.traj.inputs[(0, k)]);
        let f1 = neuron_rhs(&self.params, &x1, self.traj.inputs[(0, k + 1)]);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let mut x = [0.0; 4];
        for i in 0..4 {
            x[i] = h00 * x0[i] + h10 * dt * f0[i] + h01 * x1[i] + h11 * dt * f1[i];
        }
        x
    }
}

impl Linearization for NeuronLinearization<'_> {
    fn dim(&self) -> usize {
        4
    }
    fn jacobian(&self, t: f64, out: &mut [f64]) {
        let j = neuron_jacobian(&self.params, &self.state_at(t));
        for r in 0..4 {
            out[r * 4..r * 4 + 4].copy_from_slice(&j[r]);
        }
    }
}

// out = J · psi  (all row-major dim×dim)
fn mul(dim: usize, j: &[f64], psi: &[f64], out: &mut [f64]) {
    for r in 0..dim {
        for c in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += j[r * dim + k] * psi[k * dim + c];
            }
            out[r * dim + c] = acc;
        }
    }
}

/// FTLE on the uniform grid `t_start + k·dt`, `k = 0..n_samples`.
///
/// Each exponent integrates the variational equation across the `round(window/dt)` grid
/// intervals ending at its output time; outputs start at the first time with a full window
/// of history.
pub fn ftle_on_grid<L: Linearization>(
    lin: &L,
    t_start: f64,
    dt: f64,
    n_samples: usize,
    window: f64,
    selector: &[usize],
) -> Result<FtleSeries> {
    let dim = lin.dim();
    if !(dt > 0.0) || !(window > 0.0) {
        return Err(Error::InvalidArgument("dt and window must be positive".into()));
    }
    if window < dt * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!("window {window} shorter than sample step {dt}")));
    }
    if selector.is_empty() || selector.iter().any(|&i| i >= dim) {
        return Err(Error::InvalidArgument(format!("output selector {selector:?} invalid for dimension {dim}")));
    }
    let w = (window / dt).round() as usize;
    if n_samples <= w {
        return Err(Error::InvalidArgument(format!(
            "window of {w} steps exceeds available history of {} steps",
            n_samples.saturating_sub(1)
        )));
    }
    let nu = w as f64 * dt;
    let d2 = dim * dim;

    // Jacobians on the grid and at interval midpoints.
    let mut grid = vec![0.0; n_samples * d2];
    let mut mid = vec![0.0; (n_samples - 1) * d2];
    for k in 0..n_samples {
        lin.jacobian(t_start + k as f64 * dt, &mut grid[k * d2..(k + 1) * d2]);
    }
    for k in 0..n_samples - 1 {
        lin.jacobian(t_start + (k as f64 + 0.5) * dt, &mut mid[k * d2..(k + 1) * d2]);
    }

    let mut psi = vec![0.0; d2];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; d2], vec![0.0; d2], vec![0.0; d2], vec![0.0; d2], vec![0.0; d2]);
    let mut times = Vec::with_capacity(n_samples - w);
    let mut lambda = Vec::with_capacity(n_samples - w);
    let mut proj = Mat::<f64>::zeros(dim, selector.len());
    for end in w..n_samples {
        psi.iter_mut().enumerate().for_each(|(i, v)| *v = if i % (dim + 1) == 0 { 1.0 } else { 0.0 });
        for i in end - w..end {
            let j0 = &grid[i * d2..(i + 1) * d2];
            let jm = &mid[i * d2..(i + 1) * d2];
            let j1 = &grid[(i + 1) * d2..(i + 2) * d2];
            mul(dim, j0, &psi, &mut k1);
            for x in 0..d2 {
                tmp[x] = psi[x] + 0.5 * dt * k1[x];
            }
            mul(dim, jm, &tmp, &mut k2);
            for x in 0..d2 {
                tmp[x] = psi[x] + 0.5 * dt * k2[x];
            }
            mul(dim, jm, &tmp, &mut k3);
            for x in 0..d2 {
                tmp[x] = psi[x] + dt * k3[x];
            }
            mul(dim, j1, &tmp, &mut k4);
            for x in 0..d2 {
                psi[x] += dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
            }
        }
        for (c, &sel) in selector.iter().enumerate() {
            for r in 0..dim {
                proj[(r, c)] = psi[r * dim + sel];
            }
        }
        let sigma = max_singular_value(proj.as_ref())?;
        times.push(t_start + end as f64 * dt);
        lambda.push(sigma.ln() / nu);
    }
    Ok(FtleSeries { times, lambda, window: nu })
}

/// FTLE along a neuron trajectory produced by [`super::simulate_neuron`].
pub fn compute_ftle(params: &NeuronParams, trajectory: &TimeSeriesData, window: f64, selector: &[usize]) -> Result<FtleSeries> {
    let lin = NeuronLinearization::new(*params, trajectory)?;
    ftle_on_grid(&lin, trajectory.t0, trajectory.dt, trajectory.len(), window, selector)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_linear_system_recovers_rate() {
        for lam in [-0.7, 0.0, 0.35] {
            let lin = ConstantJacobian::new(1, vec![lam]);
            let f = ftle_on_grid(&lin, 0.0, 0.01, 300, 1.0, &[0]).unwrap();
            assert_eq!(f.times.len(), 200);
            assert!(f.lambda.iter().all(|l| (l - lam).abs() < 1e-6));
        }
    }

    #[test]
    fn zero_jacobian_gives_zero_exponent() {
        let lin = ConstantJacobian::new(3, vec![0.0; 9]);
        let f = ftle_on_grid(&lin, 0.0, 0.1, 20, 0.5, &[0, 1]).unwrap();
        assert!(f.lambda.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn window_longer_than_history_is_a_domain_error() {
        let lin = ConstantJacobian::new(1, vec![1.0]);
        assert!(ftle_on_grid(&lin, 0.0, 0.1, 10, 5.0, &[0]).is_err());
        assert!(ftle_on_grid(&lin, 0.0, 0.1, 10, 0.01, &[0]).is_err());
        assert!(ftle_on_grid(&lin, 0.0, 0.1, 10, 0.5, &[1]).is_err());
    }
}
