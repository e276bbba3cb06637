pub mod bifurcation;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod models;
pub mod nonautonomous;
pub mod tipping;

pub use error::{Error, Result};
