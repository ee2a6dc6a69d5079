//! One-dimensional ultrasonic guided-wave simulation with B-spline
//! wavelet-on-interval (BSWI) finite elements and the precise integration
//! method (PIM).
//!
//! The pipeline is
//!
//! 1. [`basis`]: clamped B-spline scaling functions on the unit element,
//!    the nodal transform `R` and the element integrals.
//! 2. [`elements`]: rod and Timoshenko beam element matrices, meshing and
//!    global assembly, including crack springs from [`crack`].
//! 3. [`pim`]: state-space lift, the precise matrix exponential and exact
//!    stepping under piecewise-harmonic loads (plus a Newmark reference).
//! 4. [`signal`]: tone-burst synthesis, arrival picking, velocity and crack
//!    location estimates.
//! 5. [`cli`]: JSON scenarios, orchestration and CSV/report output.

pub mod basis;
pub mod cli;
pub mod crack;
pub mod elements;
mod error;
pub mod pim;
pub mod quadrature;
pub mod signal;

pub use error::{Error, Result};
