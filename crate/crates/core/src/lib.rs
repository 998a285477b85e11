//! Spring-loaded inverted pendulum model of running.
//!
//! The crate covers the stance phase of the spring-mass runner in
//! nondimensional polar form:
//!
//! * [`model`]: parameters, states, right-hand sides and first integrals.
//! * [`integrator`]: fixed-step classical Runge–Kutta with event location.
//! * [`asymptotics`]: strained-coordinate approximations for stiff legs.
//! * [`bvp`]: shooting for the stiffness that closes a stance phase.
//! * [`verify`]: convergence-order experiments and log-log fits.

// Negated comparisons double as NaN rejection throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bvp;
mod error;
pub mod integrator;
pub mod model;
pub mod verify;

pub use error::{Error, Result};
