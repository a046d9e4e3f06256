//! Stochastic Hopf normal form with additive noise on the first coordinate.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeriesData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfParams {
    pub mu: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Noise intensity `D`; the forcing is `√(2D)·η(t)`.
    pub noise: f64,
}

impl Default for HopfParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            rho: -0.1,
            sigma: 0.3,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfState {
    pub x1: f64,
    pub x2: f64,
}

impl Default for HopfState {
    fn default() -> Self {
        Self { x1: 1.0, x2: 0.0 }
    }
}

/// Deterministic part of the vector field.
pub fn hopf_drift(p: &HopfParams, x: [f64; 2]) -> [f64; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let radial = p.sigma * (p.mu - r2);
    let angular = 1.0 + p.rho * (r2 - p.mu);
    [radial * x[0] - angular * x[1], radial * x[1] + angular * x[0]]
}

fn rk4(p: &HopfParams, x: [f64; 2], h: f64) -> [f64; 2] {
    let add = |a: [f64; 2], s: f64, b: [f64; 2]| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = hopf_drift(p, x);
    let k2 = hopf_drift(p, add(x, 0.5 * h, k1));
    let k3 = hopf_drift(p, add(x, 0.5 * h, k2));
    let k4 = hopf_drift(p, add(x, h, k3));
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Simulates `n_steps` steps of size `dt` (output has `n_steps + 1` samples, observable `x1`).
///
/// Each step is a classical RK4 drift step followed by the additive Maruyama increment
/// `√(2D·dt)·ξ` on `x1`, with `ξ` from a ChaCha8 stream seeded with `seed`. With `noise == 0`
/// this is plain RK4 and the seed is unused.
pub fn simulate_hopf(params: &HopfParams, x0: HopfState, dt: f64, n_steps: usize, seed: u64) -> Result<TimeSeriesData> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    if !(params.noise >= 0.0) {
        return Err(Error::InvalidArgument("noise intensity must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kick = (2.0 * params.noise * dt).sqrt();
    let q = n_steps + 1;
    let mut states = Mat::<f64>::zeros(2, q);
    let mut x = [x0.x1, x0.x2];
    for k in 0..q {
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::IntegrationDiverged {
                step: k,
                msg: "non-finite Hopf state".into(),
            });
        }
        states[(0, k)] = x[0];
        states[(1, k)] = x[1];
        if k == n_steps {
            break;
        }
        x = rk4(params, x, dt);
        if params.noise > 0.0 {
            let xi: f64 = StandardNormal.sample(&mut rng);
            x[0] += kick * xi;
        }
    }
    let observables = states.get(0..1, ..).to_owned();
    let mut data = TimeSeriesData::autonomous(dt, observables)?;
    data.states = Some(states);
    data.observable_names = vec!["x1".into()];
    data.state_names = vec!["x1".into(), "x2".into()];
    Ok(data)
}
