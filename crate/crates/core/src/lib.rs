//! Path-integral Monte Carlo and verification tools for lattice systems of
//! quantum anharmonic oscillators in imaginary time.

// `ensure!` negates its condition so that NaN fails every check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gibbs;
pub mod interaction;
pub mod oracle;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use interaction::{LatticeState, Model, ModelSpec};
pub use spectral::{OscillatorParams, SpectralLoop};
