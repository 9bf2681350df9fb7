//! Hyperplane (generalized Maslov) index and Evans function tools for real
//! eigenvalues of traveling waves whose linearization has odd dimension.

pub mod error;
pub mod evans;
pub mod exterior;
pub mod index;
pub mod models;
pub mod ode;
pub mod shelves;
pub mod shooting;
pub mod spectral;
pub mod tracer;
pub mod verdict;

pub use error::{MaslovError, Result};
