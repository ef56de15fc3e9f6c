//! Irregular turbo codes for the binary erasure channel.

pub mod codec;
pub mod density;
pub mod erasure;
pub mod error;
pub mod optimizer;
pub mod peg;
pub mod sim;
pub mod trellis;

pub use error::{Error, Result};
