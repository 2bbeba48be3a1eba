//! Filesystem, file-format and command-line layer over `darkforge-core`.

pub mod annotations;
pub mod check;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod costreport;
pub mod error;
pub mod golden;
pub mod imageio;
pub mod lapmexport;
pub mod manifest;
pub mod tensorfile;

pub use error::{Error, Result};
