use std::fmt;

use winstat::WinError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: msg.into(),
        }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(e: &WinError) -> i32 {
    match e {
        WinError::Config(_) | WinError::Unsupported(_) | WinError::Domain(_) => EXIT_CONFIG,
        WinError::Validation(_)
        | WinError::Parse { .. }
        | WinError::QuantileUndefined { .. }
        | WinError::CensoringUnavailable { .. }
        | WinError::InsufficientSample(_) => EXIT_DATA,
        WinError::DegenerateWeight { .. }
        | WinError::UndefinedRatio
        | WinError::Undefined(_)
        | WinError::NonPositiveVariance { .. }
        | WinError::DegenerateTest(_) => EXIT_DEGENERATE,
        WinError::Io(_) => EXIT_IO,
        WinError::Csv(c) if c.is_io_error() => EXIT_IO,
        WinError::Csv(_) => EXIT_DATA,
    }
}

impl From<WinError> for CliError {
    fn from(e: WinError) -> Self {
        CliError {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}
