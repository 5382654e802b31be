pub mod analysis;
pub mod channel;
pub mod error;
pub mod harness;
pub mod optim;
pub mod param;
pub mod tasks;

pub use error::{Error, Result};
pub use param::ParamVector;
