use rlm_precond::Error;

pub const OK: u8 = 0;
pub const USAGE: u8 = 2;
pub const DIVERGED: u8 = 3;
pub const IO: u8 = 4;
pub const RESOURCE: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: USAGE, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: IO, message: message.into() }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Self { code: RESOURCE, message: message.into() }
    }
}

pub fn code_for(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::State(_) => USAGE,
        Error::Diverged { .. } => DIVERGED,
        Error::Resource(_) => RESOURCE,
        Error::Parse { .. } | Error::Format(_) | Error::EmptyDataset | Error::Io(_) => IO,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self { code: code_for(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
