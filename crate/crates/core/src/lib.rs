//! Numerical workbench for quantum stochastic differential equations
//! (QSDEs) with nontrivial initial conditions on finite-dimensional
//! spaces.
//!
//! The central object is the normalized matrix element of a solution
//! process between exponential vectors of step functions. Three engines
//! compute it by independent routes:
//!
//! * [`semigroup`]: ordered products of matrix exponentials along the
//!   merged plateau grid, exact up to matrix-exponential accuracy;
//! * [`series`]: the time-ordered iterated-integral series, evaluated
//!   exactly per truncation level with a rigorous tail bound;
//! * [`toyfock`]: a first-order Euler scheme on a time-discretized Fock
//!   space, giving vector-level (norm) access the other engines lack.
//!
//! On top of the engines, [`cocycle`] reconstructs stochastic generators
//! from semigroup data and checks conjugation symmetry, and
//! [`coalgebra`] drives convolution cocycles over finite-dimensional
//! coalgebras through the same machinery.

pub mod coalgebra;
pub mod cocycle;
pub mod coefficient;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod noise;
pub mod sample;
pub mod semigroup;
pub mod series;
pub mod toyfock;

pub use coefficient::{Coefficient, ElementTable, InitialMap, InitialSpace};
pub use error::Error;
pub use instance::{CoalgebraSection, EngineDefaults, Instance};
pub use linalg::{C64, CMat, CVec};
pub use noise::{ExpPair, FeConstant, NoiseDims, StepFunction};

/// Result alias for fallible operations in this crate.
pub type Result<T> = std::result::Result<T, Error>;
