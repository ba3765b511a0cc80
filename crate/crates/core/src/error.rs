use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid position {0:?}")]
    InvalidPosition(String),
    #[error("knowledge pair is not sanitized: {0}")]
    NotSanitized(String),
    #[error("variable capture: {0}")]
    VariableCapture(String),
    #[error("knowledge pair is not pure: {0}")]
    NotPure(String),
    #[error("inconsistent context")]
    Inconsistent,
    #[error("malformed atom: {0}")]
    MalformedAtom(String),
    #[error("invalid proof: {0}")]
    InvalidProof(String),
    #[error("normalizer step limit {0} reached")]
    StepLimit(usize),
    #[error("oracle bound exceeded: {0}")]
    BoundExceeded(String),
    #[error("incomplete agent binding: {0}")]
    IncompleteBinding(String),
    #[error("prefix length {len} exceeds role length {max}")]
    PrefixOutOfRange { len: usize, max: usize },
    #[error("substitution is not ground on {0}")]
    NonGroundSigma(String),
    #[error("sessions are not coherent: {0}")]
    IncoherentSessions(String),
    #[error("not an interleaving: {0}")]
    NotAnInterleaving(String),
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error("malformed protocol: {0}")]
    MalformedProtocol(String),
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("run has not been validated")]
    UnvalidatedRun,
    #[error("mode error: {0}")]
    Mode(String),
}

pub type Result<T> = std::result::Result<T, Error>;
