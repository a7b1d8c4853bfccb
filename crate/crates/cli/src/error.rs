use std::fmt;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn input(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn invariant(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_INVARIANT,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait ResultExt<T> {
    fn input(self) -> Result<T, CliError>;
    fn invariant(self) -> Result<T, CliError>;
    fn with_context_input<C: fmt::Display>(self, f: impl FnOnce() -> C) -> Result<T, CliError>;
}

impl<T, E> ResultExt<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn input(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_INPUT,
            error: e.into(),
        })
    }

    fn invariant(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_INVARIANT,
            error: e.into(),
        })
    }

    fn with_context_input<C: fmt::Display>(self, f: impl FnOnce() -> C) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: EXIT_INPUT,
            error: e.into().context(f().to_string()),
        })
    }
}
