//! Ground-truth generators for the two analytic test systems and FTLE diagnostics.

mod ftle;
mod hopf;
mod neuron;

pub use ftle::{compute_ftle, ftle_on_grid, ConstantJacobian, FtleSeries, Linearization, NeuronLinearization};
pub use hopf::{hopf_drift, simulate_hopf, HopfParams, HopfState};
pub use neuron::{
    chirp_input, mean_isi, neuron_jacobian, neuron_rhs, settle_neuron, simulate_neuron, spike_times, NeuronParams,
    NeuronState,
};
