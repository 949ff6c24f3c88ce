use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: i64, modulus: u64 },
    #[error("moduli {0} and {1} are not coprime")]
    ModuliNotCoprime(u64, u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("discrete logarithm of zero")]
    ZeroArgument,
    #[error("{0} is not squarefree")]
    NotSquarefree(u64),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("coefficient series has {have} terms, need {need}")]
    SeriesTooShort { have: usize, need: usize },
    #[error("residue {a} is not coprime to {q}")]
    ResidueNotCoprime { a: u64, q: u64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("no declared symmetry group for {0}")]
    UnknownSymmetryGroup(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
