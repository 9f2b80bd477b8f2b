//! Numerical foundations: tensors, Fourier transforms and reverse-mode
//! differentiation.

pub mod autodiff;
pub mod fft;
pub mod linalg;
pub mod spectral;
pub mod tensor;

pub use autodiff::{Gradients, Tape, ValueId};
pub use spectral::{dft3, idft3, mode_filter, KeptModes};
pub use tensor::{ComplexTensor, Tensor};
