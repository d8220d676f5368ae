pub mod data;
pub mod error;
pub mod eval;
pub mod importance;
pub mod model;
pub mod numcore;
pub mod training;

pub use error::{Error, Result};
