use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("frequency {0} is a declared pole of a coefficient function")]
    PoleAtFrequency(Complex64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular operator (condition estimate {condition:.3e})")]
    SingularOperator { condition: f64 },
    #[error("unsupported synthetic spec: {0}")]
    UnsupportedSpec(String),
    #[error("requested order {requested} exceeds numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("pencil has eigenvalues outside the open left half-plane")]
    UnstablePencil,
    #[error("descriptor matrix E is singular")]
    SingularE,
    #[error("Krylov breakdown: starting vector vanishes")]
    Breakdown,
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),
    #[error("expansion point makes D + s0*E singular")]
    SingularShift,
    #[error("no matrix realization supplied for function `{0}`")]
    MissingRealization(String),
    #[error("candidate blocks exhausted before reaching the target order")]
    Exhausted,
    #[error("reference transfer function is zero on the whole grid")]
    ZeroReference,
    #[error("error curve has no samples")]
    EmptyCurve,
    #[error("system is not constant-coefficient: {0}")]
    NotConstantCoefficient(String),
    #[error("coupling matrix S is numerically singular (condition {condition:.3e})")]
    SingularCoupling { condition: f64 },
    #[error("unknown coefficient function `{0}`")]
    UnknownFunction(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    /// Stable reason code used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::PoleAtFrequency(_) => "PoleAtFrequency",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SingularOperator { .. } => "SingularOperator",
            Error::UnsupportedSpec(_) => "UnsupportedSpec",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::UnstablePencil => "UnstablePencil",
            Error::SingularE => "SingularE",
            Error::Breakdown => "Breakdown",
            Error::DegenerateSamples(_) => "DegenerateSamples",
            Error::SingularShift => "SingularShift",
            Error::MissingRealization(_) => "MissingRealization",
            Error::Exhausted => "Exhausted",
            Error::ZeroReference => "ZeroReference",
            Error::EmptyCurve => "EmptyCurve",
            Error::NotConstantCoefficient(_) => "NotConstantCoefficient",
            Error::SingularCoupling { .. } => "SingularCoupling",
            Error::UnknownFunction(_) => "UnknownFunction",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::NotApplicable(_) => "NotApplicable",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
