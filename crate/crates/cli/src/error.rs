use std::fmt;
use std::process::ExitCode;

use hopperstat::analysis::CorpusError;
use hopperstat::manifest::ManifestError;
use hopperstat::ImageError;

pub const EXIT_IO: u8 = 2;
pub const EXIT_MALFORMED: u8 = 3;
pub const EXIT_CALIBRATION: u8 = 4;

/// A failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MALFORMED,
            message: message.into(),
        }
    }

    pub fn calibration(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CALIBRATION,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }

    /// Exit code for a per-frame failure.
    pub fn for_frame(file: &str, err: &ImageError) -> Self {
        match err {
            ImageError::OutOfBounds { .. } => Self::malformed(format!("{file}: {err}")),
            _ => Self::io(format!("{file}: {err}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CorpusError> for CliError {
    fn from(err: CorpusError) -> Self {
        let message = err.to_string();
        match err {
            CorpusError::Calibration(_) => Self::calibration(message),
            CorpusError::LineOutOfBounds { .. } => Self::malformed(message),
            CorpusError::Manifest(ManifestError::Parse { .. }) => Self::malformed(message),
            CorpusError::Manifest(ManifestError::Io { .. })
            | CorpusError::EmptyCorpus
            | CorpusError::MissingImage { .. }
            | CorpusError::BadFrame { .. }
            | CorpusError::UnknownExclusion(_) => Self::io(message),
        }
    }
}
