//! Residual evaluators, the semi-flat σ₂ solver, Legendre transforms and the
//! continuity-family fitter.

pub mod continuity;
pub mod equations;
pub mod legendre;
pub mod semiflat;

pub use continuity::*;
pub use equations::*;
pub use legendre::*;
pub use semiflat::*;
