use std::fmt;
use std::process::ExitCode;

use annsel::data::DataError;
use annsel::network::model_file::ModelFileError;
use annsel::network::NetworkError;
use annsel::selection::SelectionError;
use annsel::training::TrainingError;

/// Exit status contract: 2 usage or validation, 3 I/O, 4 numerical failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Usage = 2,
    Io = 3,
    Numerical = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Failure,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: Failure::Usage,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: Failure::Io,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: Failure::Numerical,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }

    fn kind_of(kind: Failure, e: impl fmt::Display) -> Self {
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn csv_kind(e: &csv::Error) -> Failure {
    if e.is_io_error() {
        Failure::Io
    } else {
        Failure::Usage
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::kind_of(Failure::Io, e)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let kind = match &e {
            DataError::Io(_) => Failure::Io,
            DataError::Csv(c) => csv_kind(c),
            _ => Failure::Usage,
        };
        Self::kind_of(kind, e)
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        let kind = match e {
            NetworkError::NonFiniteWeight(_) => Failure::Numerical,
            _ => Failure::Usage,
        };
        Self::kind_of(kind, e)
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        let kind = match &e {
            TrainingError::Numerics(_) => Failure::Numerical,
            TrainingError::Network(NetworkError::NonFiniteWeight(_)) => Failure::Numerical,
            TrainingError::Io(_) => Failure::Io,
            _ => Failure::Usage,
        };
        Self::kind_of(kind, e)
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        Self::kind_of(Failure::Usage, format!("invalid model file: {e}"))
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::Data(d) => d.into(),
            SelectionError::Training(t) => t.into(),
            SelectionError::Network(n) => n.into(),
            SelectionError::Numerics(_) => Self::kind_of(Failure::Numerical, e),
            SelectionError::Csv(ref c) => Self::kind_of(csv_kind(c), e),
            SelectionError::WorkerPool(_) => Self::kind_of(Failure::Io, e),
            _ => Self::kind_of(Failure::Usage, e),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::kind_of(csv_kind(&e), e)
    }
}
