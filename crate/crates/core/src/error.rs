use thiserror::Error;

/// Errors raised by mesh construction, surgery, assembly and the eigensolvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("triangle {triangle} violates the triangle inequality (lengths {lengths:?})")]
    TriangleInequality { triangle: usize, lengths: [f64; 3] },

    #[error("unsupported lattice: {0}")]
    UnsupportedLattice(String),

    #[error("resolution {got} is too small (need at least {min})")]
    Resolution { got: usize, min: usize },

    #[error("no polar patch is centred at vertex {0}")]
    NoPolarPatch(usize),

    #[error("epsilon {epsilon} does not fit the flat patch of radius {patch_radius}")]
    EpsilonTooLarge { epsilon: f64, patch_radius: f64 },

    #[error("no vertex ring at radius {epsilon} in the patch around vertex {center}; rebuild the mesh anchored at this radius")]
    NoRingAtRadius { center: usize, epsilon: f64 },

    #[error("disk around vertex {0} overlaps a disk that was already removed")]
    OverlappingDisk(usize),

    #[error("cannot glue loops: {0}")]
    GlueMismatch(String),

    #[error("surface is orientable; the orientation double cover is trivial")]
    AlreadyOrientable,

    #[error("involution is not an isometry of the discrete operators: {0}")]
    NotAnIsometry(String),

    #[error("mollification width {delta} exceeds the available annulus {available}")]
    MollifierTooWide { delta: f64, available: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed at shift {shift}: {reason}")]
    Factorization { shift: f64, reason: String },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("vector has zero mass norm")]
    ZeroNorm,

    #[error("height bracket [{h0}, {h1}] does not enclose the crossing: interval values {lambda_h0} and {lambda_h1} against lambda_1 = {lambda1}")]
    BracketViolated {
        h0: f64,
        h1: f64,
        lambda_h0: f64,
        lambda_h1: f64,
        lambda1: f64,
    },

    #[error("fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
