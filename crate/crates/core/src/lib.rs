#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod compat;
pub mod dilation;
pub mod error;
pub mod fourier;
pub mod interp;
pub mod kernels;
pub mod qproj;
pub mod quad;
pub mod signals;
pub mod weights;

pub use dilation::{DiagonalPower, DilationMatrix};
pub use error::{Error, Result};
pub use kernels::{BandLimitedKernel, DualFunctional};
