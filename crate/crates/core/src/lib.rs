//! Exact and spectral exterior calculus for mirror Kähler potentials on flat
//! six-dimensional Darboux models.

pub mod calculus;
pub mod error;
pub mod exterior;
pub mod linalg;
pub mod mirror_potential;
pub mod pde_solvers;
pub mod spectral;
pub mod stable_forms;
pub mod verification;

pub use error::{CoreError, Result};
