//! Numerical optimal control for quantum-battery charging.
//!
//! The crate propagates qubit Bloch vectors and oscillator moments under
//! piecewise-constant controls, searches bang-bang protocols that maximize
//! the stored energy, and certifies them against the first-order necessary
//! conditions of the Pontryagin minimum principle.
//!
//! Everything here is `no_std` with `alloc`; IO, file formats and the
//! command line live in the companion `qcharge` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod dynamics;
pub mod error;
pub mod mcp;
pub mod optimizer;
pub mod oscillator;
pub mod pmp;
pub mod two_field;
pub mod vec3;
pub mod work;

pub use dynamics::{
    energy, evolve, rotate, rotation_axis, BangBangProtocol, BlochState, QubitModel, Trajectory,
};
pub use error::Error;

/// Crate version, recorded by the runner in its manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use vec3::Vec3;
