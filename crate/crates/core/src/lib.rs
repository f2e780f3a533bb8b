pub mod error;
pub mod fiscal;
pub mod likelihood;
pub mod proxy;
pub mod sampler;
pub mod shocks;
pub mod simlab;
pub mod stats;
pub mod var;

pub use error::{Error, Result};
