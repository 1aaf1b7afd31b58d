use std::fmt;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_USER: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USER, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<hbkmr::Error> for CliError {
    fn from(e: hbkmr::Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USER };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::user(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::user(format!("json error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
