use std::fmt;
use std::process::ExitCode;

use pacproof::protocol::ProtocolError;

/// Fixed exit codes; shell tests depend on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Reject = 1,
    Config = 2,
    Data = 3,
    Protocol = 4,
    CommitmentMismatch = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    fn new(exit: Exit, e: impl fmt::Display) -> Self {
        Self {
            exit,
            message: e.to_string(),
        }
    }

    pub fn config(e: impl fmt::Display) -> Self {
        Self::new(Exit::Config, e)
    }

    pub fn data(e: impl fmt::Display) -> Self {
        Self::new(Exit::Data, e)
    }

    pub fn reject(e: impl fmt::Display) -> Self {
        Self::new(Exit::Reject, e)
    }

    pub fn protocol(e: ProtocolError) -> Self {
        match e {
            ProtocolError::CommitmentMismatch { .. } => Self::new(Exit::CommitmentMismatch, e),
            _ => Self::new(Exit::Protocol, e),
        }
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.exit as u8)
    }
}
