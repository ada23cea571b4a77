use std::fmt;
use std::process::ExitCode;

use dblab_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io = 1,
    Validation = 2,
    Solver = 3,
    Output = 4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Failure { kind: Kind::Io, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Failure { kind: Kind::Validation, message: message.into() }
    }

    pub fn output(message: impl Into<String>) -> Self {
        Failure { kind: Kind::Output, message: message.into() }
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::NoRoot { .. } | Error::Quadrature { .. } | Error::Bracket { .. } => Kind::Solver,
            Error::Io(_) => Kind::Io,
            _ => Kind::Validation,
        };
        Failure { kind, message: e.to_string() }
    }
}
