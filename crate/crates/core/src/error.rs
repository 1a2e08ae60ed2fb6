use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot encode an empty packet")]
    EmptyInput,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("codeword length {0} is odd")]
    OddLength(usize),

    #[error("soft input of length {0} is too short for the trellis")]
    TooShort(usize),

    #[error("channel realization has all-zero gains")]
    DegenerateChannel,

    #[error("invalid decode target {label}: {reason}")]
    InvalidTarget { label: String, reason: String },

    #[error("packet index {index} outside 1..={n_max}")]
    IndexOutOfRange { index: usize, n_max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("failed to parse configuration")]
    ConfigParse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
