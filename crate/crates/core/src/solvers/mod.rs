//! Numerical machinery: ODE integration, root finding, least squares,
//! shooting on `Π₀`, and `ε`-continuation.

pub mod continuation;
pub mod costate;
pub mod lm;
pub mod ode;
pub mod roots;
pub mod shooting;

pub use continuation::{continue_epsilon, ContinuationOptions, ContinuationPlan, ContinuationReport, Predictor};
pub use ode::{integrate, IvpOptions, IvpSpec, OdeSolution};
pub use roots::find_root;
pub use shooting::{shoot, BoundaryProblem, Family, ShootError, ShootOptions, ShootSolution};
