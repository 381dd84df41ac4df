//! File formats and the command line around [`ddhmm_core`]: session logs as
//! delimited text, versioned parameter files, report tables and the `ddhmm`
//! binary.

pub mod cli;
pub mod error;
pub mod params_file;
pub mod report;
pub mod sessions;

pub use error::{Error, Result};
pub use params_file::{params_from_str, params_to_string, read_params, write_params};
pub use sessions::{load_sessions, read_sessions, save_sessions, write_sessions, LoadOptions, LoadedSessions};
