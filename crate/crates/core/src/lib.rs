pub mod error;
pub mod cli;
pub mod families;
pub mod expstate;
pub mod fockspace;
pub mod gaussian;
pub mod numkit;
pub mod symplectic;

pub use error::{Error, Result};
