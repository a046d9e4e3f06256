//! Vector approximate message passing for `y = A·x + n` under a separable prior.

mod prior;
mod sensing;
mod solver;

pub use prior::{denoise_mmse, Denoised, PriorKind, PriorSpec};
pub use sensing::{lmmse_estimate, LmmsePath, SensingModel};
pub use solver::{
    extrinsic_update, vamp_iterate, vamp_solve, vamp_solve_from, Extrinsic, IterationOutput, IterationRecord,
    VampOptions, VampResult, VampState,
};
