//! Numerical apparatus for half-harmonic maps from ℝ into S¹.
//!
//! The crate covers the spectral half-Laplacian on the circle, the conformal
//! bridge to the line, principal-value quadrature on the line, the Möbius
//! bubble family, the linearized operator around the standard bubble with its
//! mode-space kernel solver, and a Riemannian gradient descent for the energy.

pub mod bubbles;
pub mod commands;
pub mod conformal;
pub mod error;
pub mod line;
pub mod linearization;
pub mod minimizer;
pub mod nonlocal;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
