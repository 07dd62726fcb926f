//! Controllability analysis and fault-tolerant control for co-planar
//! multicopters.
//!
//! The crate is organised bottom-up:
//!
//! - [`vehicle`]: physical model, effectiveness matrix, rigid-body and motor
//!   dynamics, fixed-step RK4 plant integration.
//! - [`controllability`]: linear hover models, the signed authority indices
//!   over the attainable wrench zonotope (full and reduced), a Monte-Carlo
//!   membership oracle, and failure sweeps.
//! - [`controller`]: four-loop nonlinear dynamic inversion cascade.
//! - [`allocation`]: redistributed pseudo-inverse allocation with fault
//!   masking and reduced-channel mode.
//! - [`fdi`]: thrust-residual fault detection with latching isolation.
//! - [`sim`]: reference generation, scenarios and the closed-loop engine.
//! - [`io`]: scenario files, CSV logs and SVG rendering.
//!
//! Rotor indices are zero-based in the API. Files, logs and plots number
//! rotors from 1.

pub mod allocation;
pub mod controllability;
pub mod controller;
mod error;
pub mod fdi;
pub mod io;
pub mod sim;
pub mod vehicle;

pub use error::{Error, Result};
