//! Numerical building blocks: quadrature, ODE integration, banded LU,
//! finite-difference stencils and cutoff functions.

pub mod banded;
pub mod cutoff;
pub mod ode;
pub mod quadrature;
pub mod stencil;
