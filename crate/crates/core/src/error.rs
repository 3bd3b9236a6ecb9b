use thiserror::Error;

/// Everything that can go wrong while building bundles, sections and holonomies.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NonHermitianInput { residual: f64 },
    #[error("matrix is not anti-Hermitian (residual {residual:e})")]
    NonAntiHermitian { residual: f64 },
    #[error("matrix is not unitary (residual {residual:e})")]
    NonUnitary { residual: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is numerically singular (smallest singular value {min_singular:e})")]
    SingularInput { min_singular: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry in input")]
    NonFinite,

    #[error("invalid spin: 2s = {0} is not a positive integer")]
    InvalidSpin(f64),
    #[error("invalid winding index J = {0} (expected 1 or 2)")]
    InvalidJ(i64),
    #[error("invalid model parameter: {0}")]
    InvalidModel(String),
    #[error("unknown branch label `{0}`")]
    UnknownBranch(String),
    #[error("parameter point {0:?} is outside the allowed parameter space")]
    OutOfDomain(Vec<f64>),
    #[error("degeneracy condition violated at {point:?}: {reason}")]
    DegeneracyViolation { point: Vec<f64>, reason: String },
    #[error("spectral gap collapsed at path node {node} ({point:?})")]
    GapCollapse { node: usize, point: Vec<f64> },
    #[error("eigenspace jumped between path nodes {node} and {} (refine the path)", node + 1)]
    SubspaceJump { node: usize },

    #[error("point lies at the excluded pole of patch `{0}`")]
    AtAntipode(String),
    #[error("point {point:?} is outside patch `{patch}`")]
    OutOfPatch { patch: String, point: Vec<f64> },
    #[error("model `{0}` has no rotation covariance; rotate-to-pole sections are unavailable")]
    NotRotationCovariant(String),
    #[error("zero sample in U(1) loop at index {0}")]
    ZeroSample(usize),
    #[error("aliased sampling: phase step {step:.3} at index {index} is not below pi")]
    AliasedSampling { index: usize, step: f64 },
    #[error("too few samples ({0}); at least 8 are required")]
    TooFewSamples(usize),
    #[error("winding sum is not close to an integer (residual {0:.3e})")]
    NonIntegerWinding(f64),

    #[error("finite-difference stencil leaves patch `{0}`")]
    PatchBoundary(String),
    #[error("finite-difference step too large: Hermitian residue {discard:e} vs connection {norm:e}")]
    StepTooLarge { discard: f64, norm: f64 },
    #[error("path is not closed")]
    PathNotClosed,
    #[error("holonomy has an eigenvalue at -1; principal logarithm undefined")]
    LogBranch,
    #[error("integration did not converge (Richardson estimate {estimate:e} > {tolerance:e})")]
    NonConvergent { estimate: f64, tolerance: f64 },

    #[error("degenerate loop: {0}")]
    DegenerateLoop(String),
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("bad path preset parameters: {0}")]
    BadPresetParams(String),

    #[error("scenario error: {0}")]
    Schema(String),
    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Domain errors are the ones caused by the parameter point rather than by
    /// the numerics; the CLI reports them with a dedicated exit code.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::OutOfDomain(_)
                | Error::GapCollapse { .. }
                | Error::DegeneracyViolation { .. }
                | Error::SubspaceJump { .. }
                | Error::AtAntipode(_)
                | Error::OutOfPatch { .. }
                | Error::PatchBoundary(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NonConvergent { .. }
                | Error::SingularInput { .. }
                | Error::StepTooLarge { .. }
                | Error::LogBranch
                | Error::NonIntegerWinding(_)
                | Error::AliasedSampling { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
