//! Electromagnetism with direction-dependent potentials on pseudo-Finsler spaces.

pub mod cli;
pub mod dynamics;
pub mod em;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod maxwell;
pub mod sampling;
pub mod scene;
pub mod validate;

pub use error::{Error, Result};
