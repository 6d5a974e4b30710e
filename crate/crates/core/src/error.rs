use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("element {element} does not belong to group {group}")]
    MismatchedGroup { group: String, element: String },

    #[error("group {0} is infinite")]
    InfiniteGroup(String),

    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("generator {index} of {group} has no image")]
    UndefinedGenerator { group: String, index: usize },

    #[error("not a homomorphism: {0}")]
    NotAHomomorphism(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("expected a matrix over {expected}, got {found}")]
    WrongGroup { expected: String, found: String },

    #[error("root finding failed: {0}")]
    RootFindFailure(String),

    #[error("sandwich polynomial could not be certified up to degree {max_degree}")]
    CertificationFailed { max_degree: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} levels, got {got}")]
    InsufficientLevels { needed: usize, got: usize },

    #[error("semi-integrality hypothesis violated at level {level}: lnDet = {logdet}")]
    HypothesisViolated { level: usize, logdet: f64 },

    #[error("matrices are not mutually inverse over the group ring")]
    NotInverse,

    #[error("boundary maps do not compose to zero in degree {degree}")]
    NotAComplex { degree: usize },

    #[error("torsion undefined: complex is not L2-acyclic (b_{degree} = {betti})")]
    TorsionUndefined { degree: usize, betti: f64 },

    #[error(
        "exact trace mismatch at level {level}, power {power}: group {expected}, level {found}"
    )]
    TraceMismatch {
        level: usize,
        power: usize,
        expected: String,
        found: String,
    },

    #[error("no oracle available for {0}")]
    OracleUnavailable(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn mismatched(
        group: &crate::GroupDescriptor,
        element: &crate::GroupElement,
    ) -> Self {
        Error::MismatchedGroup {
            group: group.to_string(),
            element: format!("{element:?}"),
        }
    }
}
