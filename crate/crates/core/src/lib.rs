//! Numerical core for damped wave equations on diffeomorphically perturbed
//! domains.
//!
//! Every perturbed problem `u_tt + u_t - Δu = -f(u)` on `h(Ω)` is pulled back to
//! the reference domain `Ω`, where it becomes a variable-coefficient problem
//! built from the Jacobian data of `h`. All perturbed problems therefore share
//! one discrete space, and states from different domains can be compared
//! coefficient by coefficient.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `wavegh` companion crate.
//!
//! Modules:
//! - [`perturbation`]: analytic diffeomorphism families, C² distances,
//!   pullback coefficient fields and state transfer.
//! - [`discretization`]: meshes, P1/Q1 assembly of the pulled-back weak form,
//!   the first Dirichlet eigenvalue, energy norms and the nonlinearity.
//! - [`dynamics`]: IMEX trapezoidal integration, energy profiles, Gronwall
//!   checks, attractor sampling and conjugated-flow errors.
//! - [`gh`]: Gromov-Hausdorff distances between finite metric spaces and
//!   between finite flows.
#![no_std]
// NaN must fail the `!(x > 0.0)` style guards used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod gh;
pub mod linalg;
pub mod perturbation;

pub use error::{Error, Result};
