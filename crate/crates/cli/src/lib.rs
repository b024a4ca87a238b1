//! Command-line companion to `sykrl-core`: declarative run configuration,
//! on-disk artifact formats, and end-to-end training, filtering, and
//! benchmark drivers.

pub mod config;
pub mod driver;
pub mod formats;
