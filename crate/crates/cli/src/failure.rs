use std::fmt;

use hilbert_sgm::{DataError, Error};

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;
pub const EXIT_DIVERGENCE: u8 = 5;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_IO,
            error: error.into(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            error: anyhow::anyhow!("invalid configuration: {message}"),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut shown = String::new();
        for cause in self.error.chain() {
            let text = cause.to_string();
            if shown.contains(&text) {
                continue;
            }
            if !shown.is_empty() {
                shown.push_str(": ");
            }
            shown.push_str(&text);
        }
        f.write_str(&shown)
    }
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e: Error = e.into();
        let code = if e.is_divergence() {
            EXIT_DIVERGENCE
        } else if matches!(
            e,
            Error::Data(
                DataError::Io { .. }
                    | DataError::Csv(_)
                    | DataError::Empty { .. }
                    | DataError::Ragged { .. }
                    | DataError::NonNumeric { .. }
                    | DataError::TooFewColumns { .. }
            )
        ) {
            EXIT_IO
        } else {
            EXIT_CONFIG
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}
