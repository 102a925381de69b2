use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A signal failed a structural invariant (empty, NaN/Inf sample, bad rate).
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    /// Two signals that must share a sample rate do not.
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: f64, right: f64 },

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A carrier does not contain enough interior split points.
    #[error("insufficient split points: found {found} interior peaks, need {needed}")]
    InsufficientPeaks { found: usize, needed: usize },

    /// A hydrophone capture is shorter than the frame layout requires.
    #[error("capture too short: {have} samples, layout requires {need}")]
    CaptureTooShort { have: usize, need: usize },

    /// A demodulation slot would read past the end of the equalized stream.
    #[error("symbol slot {slot} extends past signal end ({need} samples needed, {have} available)")]
    SlotOutOfRange { slot: usize, need: usize, have: usize },

    /// Configuration file problem (parse failure or invalid field).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An error from a lower layer, annotated with frame/hydrophone context.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with harness-level context (frame index, hydrophone, ...).
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
