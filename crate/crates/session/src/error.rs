use crate::reader::Session;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("not a session file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(&'static str),
    /// The file ends before its footer. `recovered` holds every complete record.
    #[error("truncated session: {} complete blocks recovered", .recovered.blocks.len())]
    Truncated { recovered: Box<Session> },
    #[error("block rate {found} SPS differs from session rate {expected} SPS")]
    InconsistentRate { expected: u32, found: u32 },
    #[error("malformed session: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
