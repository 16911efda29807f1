//! Spectral Galerkin simulation of the stochastic Landau–Lifshitz–Gilbert
//! equation on an interval with Neumann boundary conditions.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod integrators;
pub mod model;
pub mod output;
pub mod spectral;
pub mod verify;
pub mod wiener;

pub use error::{Result, SllgError};
pub use field::Vec3;
pub use spectral::{FieldCoeffs, PhysicalField, SpectralBasis};
