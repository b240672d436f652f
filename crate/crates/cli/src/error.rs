//! Command errors carrying their process exit code: 1 usage, 2 data,
//! 3 validation failure.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Validation,
}

#[derive(Debug)]
pub struct CmdError {
    pub kind: ErrorKind,
    pub source: anyhow::Error,
}

pub type CmdResult<T = ()> = Result<T, CmdError>;

impl CmdError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CmdError {
            kind: ErrorKind::Usage,
            source: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn data(err: impl Into<anyhow::Error>) -> Self {
        CmdError {
            kind: ErrorKind::Data,
            source: err.into(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CmdError {
            kind: ErrorKind::Validation,
            source: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Validation => 3,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<anyhow::Error> for CmdError {
    fn from(err: anyhow::Error) -> Self {
        CmdError::data(err)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(err: std::io::Error) -> Self {
        CmdError::data(err)
    }
}

impl From<parslate_core::CoreError> for CmdError {
    fn from(err: parslate_core::CoreError) -> Self {
        CmdError::data(anyhow::anyhow!("{err}"))
    }
}
