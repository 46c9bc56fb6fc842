//! Command-line companion to `cyclosense-core`: dataset synthesis and
//! persistence, experiment orchestration (detection, classification,
//! two-stage chains, feature and crop sweeps, detector comparisons), and
//! report generation. The core crate holds the numerics; this crate holds
//! everything that touches the filesystem, configuration, or a terminal.

pub mod config;
pub mod dataio;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod report;

pub use error::{CliError, Result};
