//! Optimal transport, relative entropy and transportation inequalities on
//! round spheres.

pub mod error;
pub mod entropy;
pub mod fields;
pub mod jacobi;
pub mod linalg;
pub mod numeric;
pub mod sphere;
pub mod transport;

pub use error::{Error, Result};
