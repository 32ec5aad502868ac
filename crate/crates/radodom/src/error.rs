use std::fmt;
use std::path::{Path, PathBuf};

/// Where in a file a format problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// 1-based text line.
    Line(usize),
    /// 0-based azimuth row of a scan.
    Row(usize),
    /// A named header or manifest field.
    Field(String),
    Header,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Row(r) => write!(f, "row {r}"),
            Location::Field(name) => write!(f, "field `{name}`"),
            Location::Header => f.write_str("header"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {location}: {message}", path.display())]
    Format { path: PathBuf, location: Location, message: String },
    #[error("{}: {what} not found", path.display())]
    Missing { path: PathBuf, what: &'static str },
    #[error(transparent)]
    Core(#[from] radodom_core::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn format(path: &Path, location: Location, message: impl Into<String>) -> Self {
        IoError::Format { path: path.to_path_buf(), location, message: message.into() }
    }

    /// Location of a format error, if this is one.
    pub fn location(&self) -> Option<&Location> {
        match self {
            IoError::Format { location, .. } => Some(location),
            _ => None,
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}
