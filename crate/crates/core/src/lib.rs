//! Decorated-expander graph family with exact Perron-Frobenius recursions, a
//! labeled query oracle, and classical exploration experiments.

pub mod bounds;
pub mod error;
pub mod expander;
pub mod explorer;
pub mod graph_model;
pub mod linalg;
pub mod numeric;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
