use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("symbol {0:?} is not in the alphabet")]
    SymbolNotInAlphabet(char),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid language spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported language spec: {0}")]
    UnsupportedSpec(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("protocol {protocol} expects {expected}, got {got}")]
    ProverArity {
        protocol: &'static str,
        expected: &'static str,
        got: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
