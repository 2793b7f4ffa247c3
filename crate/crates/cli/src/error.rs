use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cloud_ksvd::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("config file: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] toml::ser::Error),
    #[error("mnist data not found in {}", .0.display())]
    MissingData(PathBuf),
    #[error("row count {rows} of {file} differs from the declared {declared}")]
    RowCount {
        file: String,
        rows: usize,
        declared: usize,
    },
}
