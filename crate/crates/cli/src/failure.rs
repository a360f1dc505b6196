use std::fmt;

use sticky_landscape::Error;

/// Command failure with its process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Numerical trouble inside a computation (exit 1).
    Numerical(String),
    /// A required input file or catalog is absent (exit 2).
    Missing(String),
    /// Inputs disagree with each other or cannot be parsed (exit 3).
    Inconsistent(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Numerical(_) => 1,
            Self::Missing(_) => 2,
            Self::Inconsistent(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Numerical(m) | Self::Missing(m) | Self::Inconsistent(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Missing(_) => Self::Missing(msg),
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => Self::Missing(msg),
            Error::Inconsistent(_) | Error::Parse { .. } | Error::InvalidBond(..) => Self::Inconsistent(msg),
            _ => Self::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::Inconsistent(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::Inconsistent(e.to_string())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
