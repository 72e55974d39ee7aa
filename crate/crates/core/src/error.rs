use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("operands are bound to different moduli")]
    ModulusMismatch,
    /// An element that should have been a unit modulo N is not. Only reachable
    /// through corrupted input, since `GroupElement` construction checks it.
    #[error("corrupt element: value is not a unit modulo N")]
    NotAUnit,
    #[error("value is not a canonical residue modulo N")]
    NotCanonical,
    #[error("operation requires the trapdoor (factorization of N)")]
    MissingTrapdoor,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what}: search exhausted after {attempts} attempts")]
    SearchExhausted { what: &'static str, attempts: u64 },
    #[error("value does not fit in {width} bytes")]
    WidthOverflow { width: usize },
    #[error("malformed hex string: {0:?}")]
    MalformedHex(String),
    #[error("computation cancelled")]
    Cancelled,
    #[error("inconsistent claim: {0}")]
    InconsistentClaim(String),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
}
