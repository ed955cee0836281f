use std::fmt;

/// Errors reported by the estimation and design routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the operation's domain. The message names the
    /// violated requirement.
    Domain(&'static str),
    /// An invalid grid or scan range was requested.
    InvalidRange(&'static str),
    /// A curve or scan was asked for its minimum but holds no points.
    EmptyCurve,
    /// The search for the smallest r hit its cap before meeting the target.
    /// Carries the best candidate seen so the caller can report it.
    TargetUnreachable {
        cap: u32,
        best_r: u32,
        best_confidence: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InvalidRange(msg) => write!(f, "invalid range: {msg}"),
            Error::EmptyCurve => write!(f, "curve has no evaluated points"),
            Error::TargetUnreachable {
                cap,
                best_r,
                best_confidence,
            } => write!(
                f,
                "target unreachable within r <= {cap}; best seen r = {best_r} \
                 with confidence {best_confidence}"
            ),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
