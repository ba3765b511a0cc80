//! Static analysis of equality and assertion knowledge in security protocols.

pub mod assertion;
pub mod cli;
pub mod consistency;
pub mod derive;
pub mod dy;
pub mod eq;
pub mod error;
pub mod insecurity;
pub mod oracles;
pub mod protocol;
pub mod report;
pub mod speclang;
pub mod term;

pub use error::{Error, Result};
