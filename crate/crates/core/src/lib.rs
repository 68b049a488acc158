pub mod agent;
pub mod array;
pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod neural;

pub use error::{Error, Result};
