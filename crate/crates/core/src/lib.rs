//! Exact solutions of the Boiti–Leon–Pempinelli system, finite-difference
//! residual checks, sampling of the gradient field `U`, and box-counting
//! dimension estimates of the resulting surfaces.

pub mod boxcount;
pub mod consistency;
pub mod riccati;
pub mod sampler;
pub mod solutions;
pub mod special;
pub mod verifier;
