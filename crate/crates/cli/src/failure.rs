//! Process-level error taxonomy.
//!
//! Exit codes are frozen for scripting: 1 = usage, 2 = unreadable or
//! malformed inputs, 3 = numeric/degenerate conditions.

use std::fmt;

#[derive(Debug)]
pub enum Failure {
    /// Flag combinations or values the parser accepts but the command
    /// rejects (exit 1).
    Usage(String),
    /// Input files that cannot be read or parsed, including config files
    /// (exit 2).
    Input(String),
    /// Errors from the pipeline, classified by kind (exit 2 or 3).
    Core(ranktune::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Core(e) if e.is_input_error() => 2,
            Failure::Core(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) | Failure::Input(msg) => write!(f, "{msg}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ranktune::Error> for Failure {
    fn from(e: ranktune::Error) -> Self {
        Failure::Core(e)
    }
}
