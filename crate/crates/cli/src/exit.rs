use std::fmt;

pub const OK: u8 = 0;
pub const TOLERANCE: u8 = 1;
pub const USAGE: u8 = 2;
pub const DEGENERATE: u8 = 3;

/// An error carrying the process exit code it should map to.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Exit { code: USAGE, message: message.into() }.into()
}

pub fn degenerate(message: impl Into<String>) -> anyhow::Error {
    Exit { code: DEGENERATE, message: message.into() }.into()
}

/// Exit code for an error; anything not tagged is treated as bad input.
pub fn code_of(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<Exit>().map_or(USAGE, |e| e.code)
}

pub fn from_sample(err: blp_core::sampler::SampleError) -> anyhow::Error {
    use blp_core::sampler::SampleError;
    let empty = match &err {
        SampleError::EmptyField { .. } => true,
        SampleError::Level { source, .. } => matches!(**source, SampleError::EmptyField { .. }),
        _ => false,
    };
    if empty {
        degenerate(err.to_string())
    } else {
        usage(err.to_string())
    }
}

pub fn from_boxcount(err: blp_core::boxcount::BoxCountError) -> anyhow::Error {
    use blp_core::boxcount::BoxCountError;
    match err {
        BoxCountError::TooFewValues(_) | BoxCountError::DegenerateRange | BoxCountError::EmptySet => {
            degenerate(err.to_string())
        }
        _ => usage(err.to_string()),
    }
}
