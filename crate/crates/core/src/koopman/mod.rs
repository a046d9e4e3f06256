//! Delay embedding, nonlinear lifting, snapshot assembly, POD and least-squares estimators.

mod embedding;
mod lift;
mod model;
mod pod;
mod snapshots;

pub use embedding::{build_delay_embedding, DelayBuffer, EmbeddingConfig};
pub use lift::{evaluate_lift, n_monomials, rbf_random, Lift, LiftKind, LiftSpec};
pub use model::{fit_model, FitMode, FitOptions, KoopmanModel};
pub use pod::{compute_pod, PodBasis};
pub use snapshots::{assemble_snapshots, Snapshots};
