//! File formats, configuration and command implementations on top of
//! `toeplitz-core`.

pub mod config;
pub mod format;
pub mod patch_io;
pub mod run;

pub use config::RunConfig;
pub use format::WindowFile;
pub use run::{Outcome, Overrides, RunError};
