//! Time-varying covariance paths between positive-definite matrices.
//!
//! Every path in this crate is the state covariance `P_t = E[x_t x_t']` of a
//! linear stochastic system `dx = A_t x dt + σ dw` on `t ∈ [0, 1]`, chosen to
//! minimize a quadratic penalty on the system matrix `A_t`:
//!
//! * [`omt`]: the optimal-mass-transport / Schrödinger-bridge penalty
//!   `tr(A P A')`, which has a closed form.
//! * [`fisher_rao`]: the weighted-mass-transport penalty `tr(P⁻¹ A P A')`, whose
//!   noiseless solutions are Fisher-Rao geodesics. Noisy matrix paths come from a
//!   coupled `(P, Π)` ODE; scalar paths have exact closed forms.
//! * [`wls`]: the weighted-least-squares penalty `‖A_s‖² + ε‖A_a‖²`, whose
//!   noiseless solutions have a rotating eigenspace.
//!
//! [`solvers`] carries the ODE integrator, root finding, Levenberg-Marquardt,
//! shooting on the initial costate `Π₀`, and ε-continuation. [`montecarlo`]
//! simulates the underlying SDE and [`fit`] fits the path families to noisy
//! sample covariances.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod fisher_rao;
pub mod fit;
pub mod linalg;
pub mod montecarlo;
pub mod omt;
pub mod path;
pub mod solvers;
pub mod wls;

pub use error::{Error, Result};
pub use linalg::{SpdMatrix, SquareMatrix, SymMatrix};
pub use path::{CovariancePath, Objective, PathModel};
