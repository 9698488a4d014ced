//! File formats: stream files, run configuration, trial sheets and reports.

pub mod config;
pub mod report;
pub mod sheet;
pub mod wire;

pub use config::{RunConfig, CONFIG_ENV};
pub use wire::{parse_stream, read_stream, write_stream, write_stream_file};
