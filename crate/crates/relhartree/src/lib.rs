//! Pseudo-spectral solver and verification harness for a two-component
//! pseudo-relativistic Hartree system with polynomial trapping potentials.
//!
//! The crate computes constrained energy minimizers of
//!
//! ```text
//! E(u1, u2) = sum_i [ <u_i, sqrt(-Lap + m^2) u_i> + int V_i u_i^2 ]
//!           - 1/2 [ a1 D(u1^2,u1^2) + a2 D(u2^2,u2^2) + 2 beta D(u1^2,u2^2) ]
//! ```
//!
//! over states with unit total mass, where D(f, g) is the Coulomb pair
//! energy with kernel 1/|x|. It also computes the scalar ground state Q of
//! the associated unconstrained problem, the critical interaction constant
//! a* = mass(Q), and verifies the collapse behaviour of minimizers as the
//! cross-coupling beta approaches its critical value beta*.
//!
//! Start at the `examples/` directory: each example is a runnable
//! demonstration of one capability (ground-state solve, energy
//! minimization, critical-coupling probes, collapse sweeps, concentration
//! selection). A thin CLI binary (`relhartree`) drives the same paths from
//! JSON run configurations.
//!
//! Module map:
//! - [`spectral`]: periodic grid, FFT-based multipliers, truncated Coulomb
//!   convolution, quadratic forms;
//! - [`model`]: energy, gradient, theory constants (a*, beta*, gamma),
//!   potential analysis;
//! - [`ground`]: scalar ground-state solver (normalized fixed-point
//!   iteration with a closing rescale);
//! - [`solver`]: two-component constrained minimizer and trial states;
//! - [`asymptotics`]: collapse sweeps toward beta*, power-law fits,
//!   concentration checks;
//! - [`cli`]: run configuration, caching, reports, command drivers.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod ground;
pub mod model;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
