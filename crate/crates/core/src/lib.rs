//! Capacity of quiver data and quiver Brascamp-Lieb constants by operator
//! scaling, with brute-force cross-checks.

pub mod bl;
pub mod blowup;
pub mod capacity;
pub mod commands;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod quiver;
pub mod scaling;
pub mod selftest;

pub use error::{Error, Result};
