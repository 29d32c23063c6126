//! Reading daily series from CSV and writing tidy result files.

mod config;
mod load;
mod write;

use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub use config::{GapPolicy, I0Policy, MobilityFormat, RunConfig, NYC_POPULATION};
pub use load::{align, load_cases, load_mobility, CountSeries, FractionSeries};
pub use write::{
    read_chains_csv, read_observed_csv, write_band_csv, write_chains_csv, write_observed_csv,
    write_sensitivity_csv, write_trajectory_csv, ChainRows, ChainsTable, FitSummary, CHAINS_HEADER,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error(
        "{path}:{line}: date {date} does not follow {previous}; dates must be strictly increasing"
    )]
    NonMonotone {
        path: PathBuf,
        line: u64,
        date: NaiveDate,
        previous: NaiveDate,
    },
    #[error("{path}:{line}: {missing} missing day(s) between {previous} and {date}")]
    Gap {
        path: PathBuf,
        line: u64,
        previous: NaiveDate,
        date: NaiveDate,
        missing: i64,
    },
    #[error("{path}:{line}: negative case count {value}")]
    NegativeCount {
        path: PathBuf,
        line: u64,
        value: f64,
    },
    #[error("{path}: no rows on or after {start}")]
    Empty { path: PathBuf, start: String },
    #[error("series do not align after trimming: mobility covers {mobility}, cases cover {cases}")]
    Alignment { mobility: String, cases: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub(crate) fn file_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}
