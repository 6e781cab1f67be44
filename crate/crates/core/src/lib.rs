//! Physics-informed fine-tuning of pre-trained spectral neural operators.
//!
//! The crate is a small laboratory for comparing data-driven, physics-informed
//! and hybrid fine-tuning of a compact Fourier neural operator on steady
//! Poisson and Helmholtz problems over the unit square:
//!
//! - [`fields`] holds node-grid scalar fields, padding, error metrics and the
//!   on-disk dataset format.
//! - [`sources`] draws seeded input fields (Gaussian blobs, nine extreme
//!   out-of-distribution families, Helmholtz media).
//! - [`fem`] computes reference solutions with bilinear quadrilateral
//!   elements.
//! - [`residual`] evaluates finite-difference PDE residuals, with Dirichlet
//!   data imposed by padding the model output.
//! - [`operator`] is the spectral neural operator with hand-written reverse
//!   mode gradients and a backbone / embedding parameter split.
//! - [`train`] runs pre-training, fine-tuning and training from scratch.
//! - [`experiments`] orchestrates dataset builds, scaling sweeps and audits;
//!   [`cli`] exposes them on the command line.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod fields;
pub mod operator;
pub mod residual;
pub mod rng;
pub mod sources;
pub mod train;

pub use error::{Error, Result};
pub use fields::{Grid, PadMode, SampleSet, ScalarField2D};
pub use operator::{Checkpoint, NeuralOperator, OperatorConfig};
pub use residual::{Boundary, PdeTask};
pub use train::{LossMode, TrainConfig, TrainLog};
