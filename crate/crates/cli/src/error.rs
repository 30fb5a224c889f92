use std::path::Path;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    pub fn data(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<tactile_cs::Error> for CliError {
    fn from(e: tactile_cs::Error) -> Self {
        use tactile_cs::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::TooLarge { .. }
            | E::OverCompression { .. }
            | E::RadiusUndefined(_)
            | E::DegenerateSplit(_)
            | E::EmptyClass(_)
            | E::SingleClass => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
