pub mod error;
pub mod harness;
pub mod measurement;
pub mod multishot;
pub mod qcore;
pub mod reservoirs;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
