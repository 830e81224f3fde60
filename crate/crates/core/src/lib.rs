pub mod error;
pub mod numerics;
pub mod regions;
pub mod simulator;
pub mod steady_state;
pub mod topology;

pub use error::{Error, Result};
