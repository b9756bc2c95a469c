//! Spectral paradifferential calculus on the torus and numerical tools for the
//! weakly dispersive Burgers family `∂ₜu + u∂ₓu + ∂ₓ|D|^{α−1}u = 0`.

pub mod error;
pub mod spectral;
pub mod flow;
pub mod gauge;
pub mod paraop;
pub mod symbols;
pub mod normalform;
pub mod solver;
pub mod experiments;

pub use error::{Error, Result};
pub use spectral::{Field, Grid, NormKind};
