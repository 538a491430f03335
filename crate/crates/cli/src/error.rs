use std::fmt::Display;
use std::path::Path;

use subscan_core::Error;
use thiserror::Error;

/// Exit-code category printed as `error[<category>]: ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Input,
    Dimension,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage => 2,
            Category::Input => 3,
            Category::Dimension => 4,
            Category::Internal => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Input => "input",
            Category::Dimension => "dimension",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Dimension(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn input(path: &Path, err: impl Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    pub fn output(path: &Path, err: impl Display) -> Self {
        CliError::Internal(format!("writing {}: {err}", path.display()))
    }

    pub fn internal(err: impl Display) -> Self {
        CliError::Internal(err.to_string())
    }

    pub fn category(&self) -> Category {
        match self {
            CliError::Usage(_) => Category::Usage,
            CliError::Input(_) => Category::Input,
            CliError::Dimension(_) => Category::Dimension,
            CliError::Internal(_) => Category::Internal,
            CliError::Core(e) => match e {
                Error::InvalidConfig(_)
                | Error::InvalidArgument(_)
                | Error::UnknownLayer(_)
                | Error::OracleTooLarge { .. }
                | Error::NoEligibleNodes => Category::Usage,
                Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => {
                    Category::Dimension
                }
                Error::Io { .. }
                | Error::Stream(_)
                | Error::BadMagic { .. }
                | Error::UnsupportedVersion { .. }
                | Error::TruncatedHeader { .. }
                | Error::TruncatedPayload { .. }
                | Error::TrailingBytes { .. }
                | Error::NonFinite { .. }
                | Error::Json(_)
                | Error::Csv(_)
                | Error::CsvValue { .. }
                | Error::DuplicateLayer(_)
                | Error::NonPositiveLayerSize { .. }
                | Error::EmptyLayout
                | Error::EmptyMatrix { .. }
                | Error::EmptyBackground
                | Error::InvalidRange { .. }
                | Error::EmptySubset
                | Error::EmptyGroup(_) => Category::Input,
                Error::InvalidCounts { .. } => Category::Internal,
            },
        }
    }
}
