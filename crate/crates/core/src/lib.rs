//! Numerical laboratory for singular-hyperbolic models.
//!
//! The crate builds four families of dynamical systems and measures their
//! invariant sets:
//!
//! * [`cantor`]: dynamically defined Cantor sets from gap schedules, with exact
//!   rational covers and the expanding map that defines them.
//! * [`lorenz_map`]: one-dimensional Lorenz-like maps (a power-law family and a
//!   C^1 extension of the Cantor map).
//! * [`geometric_lorenz`]: the planar return map and the piecewise-exact
//!   suspension flow of the geometric Lorenz model.
//! * [`solenoid`]: fibred solenoids over expanding torus endomorphisms.
//!
//! [`hyperbolicity`] holds finite-orbit diagnostics (dominated splitting, cones,
//! pre-ball contraction) and [`volume_lab`] the box-subdivision and trapped-set
//! volume estimators. [`model`] ties everything together behind one handle.

pub mod cantor;
pub mod error;
pub mod geometric_lorenz;
pub mod hyperbolicity;
pub mod lorenz_map;
pub mod model;
pub mod seeding;
pub mod solenoid;
pub mod volume_lab;

pub use error::{LabError, Result};
pub use model::{EvalMode, Model, ModelHandle, ModelPoint, TangentMatrix};
