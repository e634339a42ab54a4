//! Exterior algebra over the fixed 6-dimensional real space.

pub mod blade;
pub mod form;
pub mod grid;
pub mod io;
pub mod poly;
pub mod scalar;
pub mod symplectic;
pub mod trig;

pub use blade::{Blade, DIM};
pub use form::{ComplexForm, ConstForm, FloatForm, Form, GridForm, Multivector, PolyForm, TrigForm};
pub use grid::{GridScalar, GridShape};
pub use poly::{Exponents, PolyScalar};
pub use scalar::{int, rat, Coefficient, Rational};
pub use symplectic::{standard_structures, StandardStructures, SymplecticStructure};
pub use trig::{Frequency, TrigScalar};
