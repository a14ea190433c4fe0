//! Command implementations behind the `berkcal` binary.

pub mod fit;
pub mod ingest;
pub mod simulate;
pub mod validate;

use std::fmt;

use berkcal::CalibError;

/// Invalid command-line arguments or configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A run that completed but reported failures (self-checks or grid cells).
#[derive(Debug, Clone, PartialEq)]
pub struct ChecksFailed(pub usize);

impl fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} check(s) failed", self.0)
    }
}

impl std::error::Error for ChecksFailed {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Exit status for an error: 2 for unusable input, 3 for numerical
/// failure, 4 for anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ingest::ParseError>() || cause.is::<UsageError>() {
            return EXIT_INPUT;
        }
        if cause.is::<ChecksFailed>() {
            return EXIT_NUMERICAL;
        }
        if let Some(e) = cause.downcast_ref::<CalibError>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT };
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            if e.kind() == std::io::ErrorKind::NotFound {
                return EXIT_INPUT;
            }
        }
    }
    EXIT_INTERNAL
}
