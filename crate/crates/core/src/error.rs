use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("cutoff {cutoff} too small: truncated tail mass {tail:e} exceeds {limit:e}")]
    CutoffTooSmall {
        cutoff: usize,
        tail: f64,
        limit: f64,
    },

    #[error("photon number {n} exceeds cutoff {cutoff}")]
    AboveCutoff { n: usize, cutoff: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("conditioning outcome has zero probability")]
    ImpossibleCondition,

    #[error("relative attenuation is undefined for a zero-mean input")]
    ZeroMean,

    #[error("degenerate quantity: {0}")]
    Degenerate(String),

    #[error("no pulses without a click at D1; nothing to post-select on")]
    NoHeraldEvents,

    #[error(
        "dark-corrected D2 rate is negative ({rate:e} - {dark:e}); check the dark probability"
    )]
    NegativeCorrectedRate { rate: f64, dark: f64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed tag file: {0}")]
    MalformedTags(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Checks `lo <= value <= hi`, rejecting NaN.
pub(crate) fn check_closed(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    expected: &'static str,
) -> Result<f64> {
    if value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected,
        })
    }
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    check_closed(name, value, 0.0, 1.0, "[0, 1]")
}
