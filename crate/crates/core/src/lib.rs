pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod ansatz;
pub mod geometry;
pub mod profile;
pub mod runner;
pub mod scenario;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
