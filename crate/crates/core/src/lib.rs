//! Perturbed Richards growth toolkit.
//!
//! The crate covers the whole modelling chain for a Richards (Bertalanffy-Richards)
//! growth curve whose shape exponent switches to `q + C(t)` once the curve first
//! crosses a constant boundary:
//!
//! - [`growth`]: closed-form curve analytics, switching time, perturbation families.
//! - [`birth_death`]: the time-inhomogeneous linear birth-death and pure-birth
//!   processes whose mean is the (modified) curve.
//! - [`diffusion`]: the lognormal diffusions with the same means, exact transition
//!   law, moments and exact path sampling.
//! - [`inference`]: likelihood, parameter-box construction and the three-step
//!   estimation procedure (parameters, switching time, perturbation function).
//! - [`optimize`]: simulated annealing and ant lion optimizer over a box.
//! - [`fpt`]: first-passage-time densities by Monte Carlo and by a Volterra
//!   integral equation.
//! - [`numerics`]: splines, quadrature, root finding, normal quantiles and
//!   counter-based random streams.
//!
//! The crate is `no_std` and only needs `alloc`. The default `std` feature turns
//! on parallel path simulation and optimizer replications through rayon; results
//! are identical with or without it because every path and replication draws from
//! its own `(seed, stream)` random stream.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod birth_death;
pub mod diffusion;
mod error;
pub mod fpt;
pub mod growth;
pub mod inference;
pub mod numerics;
pub mod optimize;
mod par;

pub use error::{Error, ErrorKind, Result};
