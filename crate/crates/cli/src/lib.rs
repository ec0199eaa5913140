//! File I/O, configuration and stage runners behind the `staysim` command.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod readme;
pub mod tables;

pub use config::PipelineConfig;
pub use error::CliError;
pub use io::Format;
pub use pipeline::Layout;
