pub mod analysis;
pub mod calculus;
#[cfg(feature = "cli")]
pub mod cli;
pub mod contact;
pub mod error;
pub mod expr;

pub use error::{Error, Result};
pub mod integrate;
pub mod models;
