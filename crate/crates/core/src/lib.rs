//! Numerical laboratory for reaction-diffusion equations with a
//! state-dependent distributed delay,
//!
//! ```text
//! u_t + A u = ∫_{-r}^0 b(u(t+θ, x)) ξ(θ, u_t) dθ,   x ∈ (0, L),
//! ```
//!
//! with `A = -∂²/∂x²` under Dirichlet conditions. The crate covers:
//!
//! * [`spectral`]: eigenpairs of the Dirichlet Laplacian, sine transforms and
//!   the finite-dimensional projectors `P_N`, `P̂_N`;
//! * [`history`]: the delayed state `u_t` on a uniform `(θ, x)` grid and its norms;
//! * [`kernel`]: the clipped-norm kernel `ξ` with its sign-restricted variants;
//! * [`nonlinear`]: the scalar map `b` (Nicholson by default), its certified
//!   bounds and the delay term `B₁[ξ]`;
//! * [`solver`]: exponential-Euler time stepping of the delay equation;
//! * [`conditions`]: Lipschitz constants, spectral-gap checks, parameter
//!   synthesis and the inertial-manifold verdict;
//! * [`experiments`]: randomized verification of cone invariance, coincidence
//!   of evolution operators, Lipschitz bounds and exponential squeezing;
//! * [`config`] and [`cli`]: the run-configuration schema and command-line driver.

pub mod cli;
pub mod conditions;
pub mod config;
pub mod error;
pub mod experiments;
pub mod history;
pub mod kernel;
pub mod nonlinear;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
