use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown suite `{0}` (expected symmetrizer, wick, quantization, toeplitz, haagerup or all)")]
    UnknownSuite(String),

    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error("cannot encode report: {0}")]
    Encode(String),

    #[error("cannot decode report: {0}")]
    Decode(String),
}
