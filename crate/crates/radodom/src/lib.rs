//! File formats, dataset layout and command implementations around
//! `radodom-core`.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod format;
pub mod scenario;

pub use config::Config;
pub use dataset::{DatasetLayout, FileScans};
pub use error::{IoError, Location, Result};
pub use scenario::{Scenario, SimDataset};
