use core::fmt;

/// Errors raised by the fabric model.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its valid range.
    InvalidParameter(&'static str),
    /// Two sizes that must agree do not.
    LengthMismatch { expected: usize, found: usize },
    /// An index is out of range.
    IndexOutOfRange { index: usize, len: usize },
    /// The fixed-point internal-node solver did not settle.
    NotConverged { iterations: usize, residual: f64 },
    /// Inverter-chain pulse is too short for the rising edge to leave the chain
    /// before the stage activations are swapped.
    PulseTooShort { pulse_width: f64, phase_one_delay: f64 },
    /// An output edge never crossed the sensing threshold within the window.
    EdgeNotObserved,
    /// A declared class received no training examples.
    EmptyClass { label: i64 },
    /// Label not declared when the model was built.
    UnknownLabel { label: i64 },
    /// Inference requested before the model was finalized.
    Untrained,
    /// The efficiency metric needs a positive energy.
    ZeroEnergy,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::NotConverged { iterations, residual } => write!(
                f,
                "internal node did not converge after {iterations} iterations (residual {residual:e} V); ill-conditioned operating point"
            ),
            Error::PulseTooShort { pulse_width, phase_one_delay } => {
                write!(f, "pulse width {pulse_width:e} s does not exceed the phase I delay {phase_one_delay:e} s")
            }
            Error::EdgeNotObserved => write!(f, "output edge not observed in the simulation window"),
            Error::EmptyClass { label } => write!(f, "class {label} has no training examples"),
            Error::UnknownLabel { label } => write!(f, "label {label} was not declared"),
            Error::Untrained => write!(f, "model has not been trained"),
            Error::ZeroEnergy => write!(f, "energy must be positive"),
        }
    }
}

impl core::error::Error for Error {}
