use std::fmt;

/// Exit status of a command: `2` for bad arguments or inputs, `3` when the
/// work itself failed.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const USAGE: u8 = 2;
pub const RUNTIME: u8 = 3;

pub type CmdResult<T = ()> = Result<T, Failure>;

pub fn usage(msg: impl fmt::Display) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow::anyhow!("{msg}"),
    }
}

pub fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: RUNTIME,
        error: e.into(),
    }
}

impl From<nnrs_core::Error> for Failure {
    fn from(e: nnrs_core::Error) -> Self {
        use nnrs_core::Error as E;
        let code = match &e {
            E::EmptyCorpus
            | E::InvalidArgument(_)
            | E::Parse { .. }
            | E::DimMismatch { .. }
            | E::ZeroVector
            | E::IdOutOfRange { .. }
            | E::ShapeMismatch { .. }
            | E::RowSum { .. }
            | E::Checkpoint(_)
            | E::File { .. } => USAGE,
            E::NonFinite(_) | E::Diverged { .. } | E::Io(_) | E::Csv(_) => RUNTIME,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

pub trait Context<T> {
    /// Marks an error as a runtime failure with a leading message.
    fn or_runtime(self, what: impl fmt::Display) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Context<T> for Result<T, E> {
    fn or_runtime(self, what: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| runtime(e.into().context(what.to_string())))
    }
}
