//! Truncated q-deformed Fock spaces over finite-dimensional Araki-Woods
//! deformed Hilbert spaces, with dense and matrix-free operator engines and
//! numerical checks of second quantisation, Toeplitz norm estimates and
//! Haagerup-type approximants.

pub mod error;
pub mod fock;
pub mod haagerup;
pub mod linalg;
pub mod quantization;
pub mod space;
pub mod toeplitz;
pub mod wick;

pub use error::{Error, Result};
pub use fock::{c_q, FockContext, FockSpace, GradedOperator, GradedVector};
pub use space::{build_space, BlockSpectrum, DeformedContraction, DeformedSpace};
pub use wick::{WickPolynomial, WickWord};
