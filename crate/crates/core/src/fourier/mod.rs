//! Compressed-sensing acquisition model: orthonormal 2-D DFT, k-space
//! masks and the measurement operator `P·DFT` with its adjoint.
//!
//! Because the DFT is unitary and `P` is a coordinate selection, the rows
//! of the measurement operator are orthonormal and the gradient of the
//! data term `½‖Fx − y‖²` is 1-Lipschitz.

mod dft;
mod mask;
mod measurement;

pub use dft::{unitary_dft2, unitary_dft2_real, Dft2, Direction};
pub use mask::{generate_mask, MaskScheme, SamplingMask};
pub use measurement::{simulate_measurement, KSpaceData, MeasurementOp};
