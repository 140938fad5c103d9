//! Invasion fronts of the logistic Keller–Segel model with chemorepulsion,
//!
//! ```text
//!     u_t = d1 u_xx + (u v_x)_x + u (1 - u)
//!       0 = delta^2 v_xx + u - v,
//! ```
//!
//! from the porous-medium limit `delta = 0` (explicit fronts, closed-form
//! expansion coefficients) to finite `delta` (far-field/core continuation of
//! pushed and pulled fronts, the pushed-to-pulled transition curve, and
//! desk-scale spectral checks).

pub mod cli;
pub mod continuation;
pub mod error;
pub mod model;
pub mod numerics;
pub mod pme;
pub mod slow_manifold;
pub mod spectra;

pub use error::{Error, Result};
pub use model::{DispersionRoot, ModelParams, SpectrumCurve};
