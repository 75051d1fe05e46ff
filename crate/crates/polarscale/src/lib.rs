//! Finite-length scaling analysis of polar codes.

pub mod bec;
pub mod bound;
pub mod channel;
pub mod cli;
pub mod construction;
pub mod error;
pub mod maps;
pub mod numeric;
pub mod poly;
pub mod scaling;

pub use error::{Error, Result};
