use peeg_acquisition::AcquisitionError;
use peeg_session::SessionError;
use peeg_stream::{ClientError, StreamError};

/// A failed command. The variant picks the exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or input that cannot be interpreted.
    #[error("{0}")]
    Usage(String),
    /// Files, sockets and devices.
    #[error("{0}")]
    Io(String),
    /// The station refused a request or spoke garbage.
    #[error("{0}")]
    Protocol(String),
    /// Whoever read standard output went away, as with `| head`.
    #[error("output closed")]
    OutputClosed,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PROTOCOL: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Protocol(_) => EXIT_PROTOCOL,
            CliError::OutputClosed => EXIT_OK,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            std::io::ErrorKind::BrokenPipe => CliError::OutputClosed,
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Io(e) => e.into(),
            e => CliError::Io(e.to_string()),
        }
    }
}

impl From<AcquisitionError> for CliError {
    fn from(e: AcquisitionError) -> Self {
        match e {
            AcquisitionError::Register(_)
            | AcquisitionError::RateMismatch { .. }
            | AcquisitionError::InvalidBlockLen { .. }
            | AcquisitionError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<StreamError> for CliError {
    fn from(e: StreamError) -> Self {
        match e {
            StreamError::Unauthenticated(_) => CliError::Usage(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Protocol(e.to_string()),
        }
    }
}
