//! Configuration, file formats and verbs of the `pfrecon` tool.

pub mod config;
pub mod experiment;
pub mod io;

pub use config::{parse_config, ConfigError, ExperimentConfig};
