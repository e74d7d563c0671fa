//! Liouvillian spectra, exceptional points and reduced dynamics of a
//! driven-dissipative Kerr-cat qubit.
//!
//! Frequencies are angular (rad/µs), times are in µs.

pub mod catspace;
pub mod dynamics;
pub mod error;
pub mod exceptional;
pub mod fock;
pub mod linalg;
pub mod liouville;
pub mod model;
pub mod ode;
pub mod winding;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
pub use model::{CatSubspaceConstants, KappaConvention, ModelParams};
