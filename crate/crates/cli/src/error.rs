//! Error-to-exit-code mapping: 2 for configuration and usage problems,
//! 3 for numeric failures, 4 for I/O.

use std::fmt;

use polchip_core::{
    ClosedFormError, ConfigError, EntanglementError, FitError, SpectrumError, TransmissionError,
};

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Usage(String),
    Numeric(String),
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) | AppError::Usage(_) => 2,
            AppError::Numeric(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "config: {m}"),
            AppError::Usage(m) => write!(f, "{m}"),
            AppError::Numeric(m) => write!(f, "{m}"),
            AppError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<SpectrumError> for AppError {
    fn from(e: SpectrumError) -> Self {
        AppError::Numeric(e.to_string())
    }
}

impl From<TransmissionError> for AppError {
    fn from(e: TransmissionError) -> Self {
        AppError::Numeric(e.to_string())
    }
}

impl From<ClosedFormError> for AppError {
    fn from(e: ClosedFormError) -> Self {
        AppError::Numeric(e.to_string())
    }
}

impl From<EntanglementError> for AppError {
    fn from(e: EntanglementError) -> Self {
        AppError::Numeric(e.to_string())
    }
}

impl From<FitError> for AppError {
    fn from(e: FitError) -> Self {
        AppError::Numeric(e.to_string())
    }
}
