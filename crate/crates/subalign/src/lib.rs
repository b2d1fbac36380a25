//! File formats, external aligner adapter, parallel scheme alignment and the
//! `subalign` command-line interface on top of [`subalign_core`].

pub mod cli;
pub mod config;
mod error;
pub mod external;
pub mod formats;
pub mod parallel;

pub use error::{Error, Result};
pub use subalign_core as core;
