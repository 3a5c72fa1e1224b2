//! Compressed-sensing MRI reconstruction with an unrolled deep geometric
//! distillation network, plus the classical baselines, metrics and file
//! formats needed to train and evaluate it on a CPU.
//!
//! The crate carries its own reverse-mode autodiff ([`tensor::Tape`]) so
//! every layer, including the Fourier measurement operator, has an
//! explicit and testable backward rule.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fourier;
pub mod imaging;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use fourier::{generate_mask, KSpaceData, MaskScheme, MeasurementOp, SamplingMask};
pub use model::{init_model, load_checkpoint, save_checkpoint, DgdnConfig, DgdnModel};
pub use tensor::{Tape, Tensor, Var};
pub use training::{train, Dataset, TrainConfig, TrainLog};
