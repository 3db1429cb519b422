//! Backstepping boundary stabilization of 1-D reaction-diffusion equations
//! with space-time-varying reaction and a Volterra source term.
//!
//! The plant is
//!
//! ```text
//! w_t = w_xx + c(x,t) w + ∫_0^x w(y,t) f(x,y) dy,   w_x(0,t) = 0,   w_x(1,t) = U(t)
//! ```
//!
//! with `c(x,t) = c1(x) + c2(t)`. Choosing `λ0 > sup c`, the time-independent
//! kernel `k` maps it onto `u_t = u_xx − (λ0 − c) u` with Neumann conditions.

pub mod coefficients;
pub mod error;
pub mod kernel;
pub mod norms;
pub mod poly;
pub mod profile;
pub mod simulator;
pub mod transforms;
mod tridiag;
pub mod verify;

pub use error::{Error, Result};
pub use profile::Profile;
pub use tridiag::solve_tridiagonal;
