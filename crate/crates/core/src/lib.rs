//! Data-driven Koopman-style model identification with prediction uncertainty.
//!
//! The pipeline fits a nonlinear observable model from sampled trajectories, rolls it
//! forward, and scores each window of predictions by re-posing it as a linear inverse
//! problem `Y = A·X` solved with vector approximate message passing (VAMP). The scalar
//! posterior variance of that solve is the confidence metric.
//!
//! Modules, bottom up:
//! - [`sim`]: neuron and Hopf ground-truth generators, FTLE diagnostics
//! - [`koopman`]: delay embedding, lifting, snapshot assembly, POD and least-squares fits
//! - [`predictor`]: closed-loop rollout and batching
//! - [`vamp`]: MMSE denoiser, LMMSE stage and the VAMP iteration
//! - [`uq`]: per-batch inverse solves, threshold flags and window sweeps
//! - [`io`]: CSV ingestion/export, model files and experiment configuration
//! - [`pipeline`]: config-driven simulate / fit / predict steps shared by the CLI

pub mod error;
pub mod io;
pub mod koopman;
pub mod linalg;
pub mod pipeline;
pub mod predictor;
pub mod series;
pub mod sim;
pub mod uq;
pub mod vamp;

pub use error::{Error, Result};
pub use series::TimeSeriesData;
