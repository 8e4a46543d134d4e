//! The `peeg` command line. [`run`] takes arguments and output streams so
//! tests can drive it in-process.

pub mod analyze;
pub mod args;
pub mod backend;
mod commands;
pub mod error;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use commands::{parse_byte, parse_register};
pub use error::{CliError, EXIT_IO, EXIT_OK, EXIT_PROTOCOL, EXIT_USAGE};

/// Runs one command and returns the process exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().ansi().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(e.render().to_string().as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut io = commands::Io {
        out,
        err,
        format: cli.format,
    };
    match commands::dispatch(cli.command, &mut io) {
        Ok(()) | Err(CliError::OutputClosed) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.err, "peeg: {e}");
            e.exit_code()
        }
    }
}
