use std::path::PathBuf;

use d2nn::D2nnError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] D2nnError),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 0 success, 1 validation, 2 compute (non-finite values), 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } => 3,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(e) if e.is_compute() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(D2nnError::Csv(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(D2nnError::Json(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(D2nnError::NonFiniteLoss { epoch: 1, batch: 0 }).exit_code(), 2);
        assert_eq!(CliError::Core(D2nnError::ZeroEnergy).exit_code(), 2);
        assert_eq!(CliError::Core(D2nnError::BadMagic).exit_code(), 1);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::Core(D2nnError::Io { path: "p".into(), source: io }).exit_code(), 3);
    }
}
