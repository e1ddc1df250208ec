//! File formats, configuration and the command-line pipeline around
//! [`htsne_core`].
//!
//! - [`csv_io`]: numeric CSV tables and embedding files
//! - [`idx`]: MNIST-style IDX binaries
//! - [`svg`]: scatter plots, curves and image grids
//! - [`config`]: [`config::RunConfig`] and presets
//! - [`pipeline`]: load, reduce, embed, measure, write
//! - [`cli`]: argument parsing and exit codes

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod idx;
pub mod pipeline;
pub mod svg;

pub use cli::cli_main;
pub use error::DataError;
