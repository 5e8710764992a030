//! Load estimation, prediction and resource allocation for grant-free
//! random access with repeated transmissions.

pub mod allocation;
pub mod error;
pub mod estimation;
pub mod harness;
mod math;
pub mod prediction;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
