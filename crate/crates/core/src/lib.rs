pub mod audio;
pub mod autodiff;
pub mod error;

pub use error::{CoreError, Result};
