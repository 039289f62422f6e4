use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument fell outside its admissible range.
    Domain { what: &'static str, value: f64 },
    /// A bid function violated its shape requirements.
    InvalidBidFunction(&'static str),
    /// Best responses need the derivative tables of a belief pair.
    MissingDerivatives,
    /// A metric was requested for a profile whose solver did not converge.
    NotConverged,
    /// The dataset holds no record with the given ex-post value.
    EmptyValueClass { value: u8 },
    /// A Monte Carlo conditioning event was never observed.
    EmptyConditioningEvent,
    InvalidArgument(&'static str),
    Unsupported(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of range: {value}"),
            Error::InvalidBidFunction(why) => write!(f, "invalid bid function: {why}"),
            Error::MissingDerivatives => write!(f, "belief pair has no derivative tables"),
            Error::NotConverged => write!(f, "equilibrium profile did not converge"),
            Error::EmptyValueClass { value } => {
                write!(f, "no observations with ex-post value {value}")
            }
            Error::EmptyConditioningEvent => write!(f, "conditioning event has no samples"),
            Error::InvalidArgument(why) => write!(f, "invalid argument: {why}"),
            Error::Unsupported(why) => write!(f, "unsupported: {why}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}
