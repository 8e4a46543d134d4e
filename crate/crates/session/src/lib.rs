//! Session recording: the `.peeg` binary format and CSV export.
//!
//! A file is the magic `PEEGSESS`, a little-endian `u16` format version, a
//! length-prefixed JSON header with its CRC-32, then a sequence of records
//! (`tag u8`, `len u32`, payload, CRC-32 of tag, length and payload). Blocks
//! store raw converter codes with the gains they were captured under, so
//! microvolts are reproduced bit for bit on read. A footer record closes the
//! file with counts and a CRC-32 of every preceding byte; a file without one
//! was cut short and can be recovered up to its last complete record.

mod csv;
mod error;
mod format;
mod header;
mod reader;
mod recorder;
mod writer;

pub use csv::{export_csv, read_csv, CsvTable};
pub use error::SessionError;
pub use format::{
    Footer, FORMAT_VERSION, MAGIC, MAX_HEADER_LEN, MAX_RECORD_LEN, TAG_ANNOTATION, TAG_BLOCK,
    TAG_FOOTER,
};
pub use header::{SessionHeader, DEFAULT_ELECTRODE};
pub use reader::{read_session, read_session_bytes, recover_session, Annotation, Session};
pub use recorder::{Annotator, Recorder};
pub use writer::SessionWriter;
