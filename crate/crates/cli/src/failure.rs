use std::fmt;

use cosrec::data::DataError;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Marks an error as the caller's fault (bad flags, missing files).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Usage and I/O problems exit with 2, everything else with 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<std::io::Error>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<cosrec::Error>() {
            return match e {
                cosrec::Error::Io(_) | cosrec::Error::Config(_) | cosrec::Error::Data(DataError::Io(_)) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            };
        }
        if let Some(DataError::Io(_)) = cause.downcast_ref::<DataError>() {
            return EXIT_USAGE;
        }
    }
    EXIT_RUNTIME
}
