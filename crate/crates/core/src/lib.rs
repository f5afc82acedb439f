pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod dual;
pub mod error;
pub mod features;
pub mod forward;
pub mod kinematics;
pub mod sampler;

pub use error::{Error, Result};
