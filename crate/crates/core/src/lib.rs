//! Code index modulation over spatial modulation and STBC-SM: codebooks,
//! transceivers, channel models, analytic error bounds and a Monte-Carlo
//! harness.

pub mod analysis;
pub mod channel;
pub mod codebook;
pub mod error;
mod linalg;
pub mod modem;
pub mod sim;
pub mod spacetime;

pub use error::{Error, Result};

pub type Cx = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<Cx>;
