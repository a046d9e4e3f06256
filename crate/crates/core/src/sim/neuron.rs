//! Conductance-based neuron with an adaptation current.
//!
//! State `x = [V, q, n, w]`; observable `g(x) = [V, q]`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeriesData;

const GATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronParams {
    /// Membrane capacitance (μF/cm²).
    pub c: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub g_w: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_l: f64,
    /// Baseline current (μA/cm²).
    pub i_b: f64,
    /// Adaptation rate (1/ms).
    pub a: f64,
    /// Adaptation half-activation voltage (mV).
    pub b: f64,
    /// Adaptation slope (mV).
    pub k: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            g_na: 35.0,
            g_k: 9.0,
            g_l: 0.1,
            g_w: 2.0,
            e_na: 55.0,
            e_k: -90.0,
            e_l: -65.0,
            i_b: 10.0,
            a: 0.02,
            b: -5.0,
            k: 0.5,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument("capacitance must be positive".into()));
        }
        if [self.g_na, self.g_k, self.g_l, self.g_w].iter().any(|&g| g < 0.0) {
            return Err(Error::InvalidArgument("conductances must be non-negative".into()));
        }
        if !(self.k > 0.0) {
            return Err(Error::InvalidArgument("adaptation slope k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub v: f64,
    pub q: f64,
    pub n: f64,
    pub w: f64,
}

impl Default for NeuronState {
    fn default() -> Self {
        Self {
            v: -64.0,
            q: 0.78,
            n: 0.09,
            w: 0.0,
        }
    }
}

impl NeuronState {
    pub fn to_array(self) -> [f64; 4] {
        [self.v, self.q, self.n, self.w]
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self {
            v: x[0],
            q: x[1],
            n: x[2],
            w: x[3],
        }
    }
}

/// `x / (1 - e^{-x})` and its derivative, with the removable singularity at 0 handled.
fn exprel(x: f64) -> (f64, f64) {
    if x.abs() < 1e-5 {
        (1.0 + x / 2.0 + x * x / 12.0, 0.5 + x / 6.0)
    } else {
        let d = -(-x).exp_m1();
        let e = (-x).exp();
        (x / d, (d - x * e) / (d * d))
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Rate functions and their voltage derivatives at one voltage.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rates {
    pub m_inf: f64,
    pub dm_inf: f64,
    pub alpha_n: f64,
    pub dalpha_n: f64,
    pub beta_n: f64,
    pub dbeta_n: f64,
    pub alpha_q: f64,
    pub dalpha_q: f64,
    pub beta_q: f64,
    pub dbeta_q: f64,
    pub w_inf: f64,
    pub dw_inf: f64,
}

impl Rates {
    pub(crate) fn at(v: f64, p: &NeuronParams) -> Self {
        let (em, dem) = exprel(0.1 * (v + 35.0));
        let alpha_m = em;
        let dalpha_m = 0.1 * dem;
        let beta_m = 4.0 * (-(v + 60.0) / 18.0).exp();
        let dbeta_m = -beta_m / 18.0;
        let sm = alpha_m + beta_m;
        let m_inf = alpha_m / sm;
        let dm_inf = (dalpha_m * beta_m - alpha_m * dbeta_m) / (sm * sm);

        let (en, den) = exprel(0.1 * (v + 34.0));
        let alpha_n = 0.1 * en;
        let dalpha_n = 0.01 * den;
        let beta_n = 0.125 * (-(v + 44.0) / 80.0).exp();
        let dbeta_n = -beta_n / 80.0;

        let alpha_q = 0.07 * (-(v + 58.0) / 20.0).exp();
        let dalpha_q = -alpha_q / 20.0;
        let beta_q = logistic(0.1 * (v + 28.0));
        let dbeta_q = 0.1 * beta_q * (1.0 - beta_q);

        let s = logistic((v - p.b) / p.k);
        let w_inf = 1.5 * s;
        let dw_inf = 1.5 * s * (1.0 - s) / p.k;

        Self {
            m_inf,
            dm_inf,
            alpha_n,
            dalpha_n,
            beta_n,
            dbeta_n,
            alpha_q,
            dalpha_q,
            beta_q,
            dbeta_q,
            w_inf,
            dw_inf,
        }
    }
}

/// Right-hand side of the neuron ODE for input current `u`.
pub fn neuron_rhs(p: &NeuronParams, x: &[f64; 4], u: f64) -> [f64; 4] {
    let [v, q, n, w] = *x;
    let r = Rates::at(v, p);
    let i_na = p.g_na * r.m_inf.powi(3) * q * (v - p.e_na);
    let i_k = p.g_k * n.powi(4) * (v - p.e_k);
    let i_l = p.g_l * (v - p.e_l);
    let i_w = p.g_w * w * (v - p.e_k);
    [
        (-i_na - i_k - i_l - i_w + u + p.i_b) / p.c,
        5.0 * (r.alpha_q * (1.0 - q) - r.beta_q * q),
        5.0 * (r.alpha_n * (1.0 - n) - r.beta_n * n),
        p.a * (r.w_inf - w),
    ]
}

/// Analytic Jacobian `∂F/∂x` (row-major 4×4). The input enters additively, so it drops out.
pub fn neuron_jacobian(p: &NeuronParams, x: &[f64; 4]) -> [[f64; 4]; 4] {
    let [v, q, n, w] = *x;
    let r = Rates::at(v, p);
    let m3 = r.m_inf.powi(3);
    let dv_dv = -(p.g_na * (3.0 * r.m_inf * r.m_inf * r.dm_inf * q * (v - p.e_na) + m3 * q)
        + p.g_k * n.powi(4)
        + p.g_l
        + p.g_w * w)
        / p.c;
    [
        [
            dv_dv,
            -p.g_na * m3 * (v - p.e_na) / p.c,
            -4.0 * p.g_k * n.powi(3) * (v - p.e_k) / p.c,
            -p.g_w * (v - p.e_k) / p.c,
        ],
        [
            5.0 * (r.dalpha_q * (1.0 - q) - r.dbeta_q * q),
            -5.0 * (r.alpha_q + r.beta_q),
            0.0,
            0.0,
        ],
        [
            5.0 * (r.dalpha_n * (1.0 - n) - r.dbeta_n * n),
            0.0,
            -5.0 * (r.alpha_n + r.beta_n),
            0.0,
        ],
        [p.a * r.dw_inf, 0.0, 0.0, -p.a],
    ]
}

fn axpy(x: &[f64; 4], h: f64, k: &[f64; 4]) -> [f64; 4] {
    [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2], x[3] + h * k[3]]
}

fn rk4_step(p: &NeuronParams, x: &[f64; 4], t: f64, h: f64, input: &dyn Fn(f64) -> f64) -> [f64; 4] {
    let k1 = neuron_rhs(p, x, input(t));
    let k2 = neuron_rhs(p, &axpy(x, 0.5 * h, &k1), input(t + 0.5 * h));
    let k3 = neuron_rhs(p, &axpy(x, 0.5 * h, &k2), input(t + 0.5 * h));
    let k4 = neuron_rhs(p, &axpy(x, h, &k3), input(t + h));
    let mut out = *x;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn check_state(x: &[f64; 4], step: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationDiverged {
            step,
            msg: "non-finite neuron state".into(),
        });
    }
    for (name, g) in [("q", x[1]), ("n", x[2])] {
        if !(-GATE_TOLERANCE..=1.0 + GATE_TOLERANCE).contains(&g) {
            return Err(Error::IntegrationDiverged {
                step,
                msg: format!("gating variable {name} = {g} left [0, 1]; reduce the step size"),
            });
        }
    }
    if x[3] < -GATE_TOLERANCE {
        return Err(Error::IntegrationDiverged {
            step,
            msg: format!("adaptation variable w = {} became negative", x[3]),
        });
    }
    Ok(())
}

/// Integrates the neuron with fixed-step RK4, sampling every `dt` for `n_steps` steps.
///
/// Sample `k` sits at time `k·dt`; each sample interval is split into `substeps` RK4 steps.
/// The input is evaluated at the RK4 stage times. Output has `n_steps + 1` columns.
pub fn simulate_neuron(
    params: &NeuronParams,
    x0: NeuronState,
    input: &dyn Fn(f64) -> f64,
    dt: f64,
    n_steps: usize,
    substeps: usize,
) -> Result<TimeSeriesData> {
    params.validate()?;
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::InvalidArgument("dt must be positive and substeps at least 1".into()));
    }
    let h = dt / substeps as f64;
    let q = n_steps + 1;
    let mut states = Mat::<f64>::zeros(4, q);
    let mut inputs = Mat::<f64>::zeros(1, q);
    let mut x = x0.to_array();
    check_state(&x, 0)?;
    for k in 0..q {
        let t = k as f64 * dt;
        for i in 0..4 {
            states[(i, k)] = x[i];
        }
        inputs[(0, k)] = input(t);
        if k == n_steps {
            break;
        }
        for s in 0..substeps {
            x = rk4_step(params, &x, t + s as f64 * h, h, input);
        }
        check_state(&x, k + 1)?;
    }
    let observables = states.get(0..2, ..).to_owned();
    let mut data = TimeSeriesData::new(dt, observables, inputs)?;
    data.states = Some(states);
    data.observable_names = vec!["V".into(), "q".into()];
    data.input_names = vec!["u".into()];
    data.state_names = vec!["V".into(), "q".into(), "n".into(), "w".into()];
    Ok(data)
}

/// Runs the unforced neuron for `duration` and returns the final state.
pub fn settle_neuron(params: &NeuronParams, x0: NeuronState, duration: f64, dt: f64, substeps: usize) -> Result<NeuronState> {
    let n = (duration / dt).round() as usize;
    let traj = simulate_neuron(params, x0, &|_| 0.0, dt, n, substeps)?;
    let s = traj.states.as_ref().expect("neuron trajectories carry states");
    let last = s.ncols() - 1;
    Ok(NeuronState::from_array([s[(0, last)], s[(1, last)], s[(2, last)], s[(3, last)]]))
}

/// The swept-sine drive `6·sin(2πt/200 + 0.0003·t²)` used for model identification.
pub fn chirp_input(t: f64) -> f64 {
    6.0 * (2.0 * std::f64::consts::PI * t / 200.0 + 0.0003 * t * t).sin()
}

/// Upward threshold crossings of `v`, linearly interpolated, in the time base `t0 + k·dt`.
pub fn spike_times(v: &[f64], t0: f64, dt: f64, threshold: f64) -> Vec<f64> {
    v.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < threshold && w[1] >= threshold)
        .map(|(k, w)| t0 + dt * (k as f64 + (threshold - w[0]) / (w[1] - w[0])))
        .collect()
}

/// Mean inter-spike interval, or `None` with fewer than two spikes.
pub fn mean_isi(spikes: &[f64]) -> Option<f64> {
    if spikes.len() < 2 {
        return None;
    }
    Some((spikes[spikes.len() - 1] - spikes[0]) / (spikes.len() - 1) as f64)
}
