use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a unit vector (|q| = {norm})")]
    InvalidUnitVector { norm: f64 },
    #[error("matrix is not a 180-degree rotation (residual {residual:.3e})")]
    NotAxisRotation { residual: f64 },
    #[error("vector is not tangent to the sphere at q (v.q = {dot:.3e})")]
    NotTangent { dot: f64 },
    #[error("grid spacing too coarse: {cells:.2} cells across the smallest dimension, need at least 4")]
    ResolutionTooCoarse { cells: f64 },
    #[error("point or node lies outside the domain: {0}")]
    OutsideDomain(String),
    #[error("degenerate surface patch cell at ({i}, {j})")]
    DegeneratePatch { i: usize, j: usize },
    #[error("ambiguous lift between adjacent samples (|n.m| = {dot:.3})")]
    AmbiguousLift { dot: f64 },
    #[error("lift obstruction: sheet choice conflicts between neighbours of node {node}")]
    LiftObstruction { node: usize },
    #[error("degree unresolved: raw value {raw:.4} is not close to an integer")]
    DegreeUnresolved { raw: f64 },
    #[error("degenerate triangle: two images are antipodal")]
    DegenerateTriangle,
    #[error("value is not regular: distance {distance:.3e} to the image surface")]
    ValueNotRegular { distance: f64 },
    #[error("geodesic interpolation passes through an antipodal pair")]
    AntipodalInterpolation,
    #[error("alpha = {alpha} too large (limit {limit}); measured {measured:?}")]
    AlphaTooLarge { alpha: f64, limit: f64, measured: Option<f64> },
    #[error("segment [P,N] too close to the domain boundary (clearance {clearance:.4}, need {required:.4})")]
    SegmentTooClose { clearance: f64, required: f64 },
    #[error("epsilon too large: measured energy {energy:.6} >= budget {budget:.6}; max admissible epsilon ~ {max_epsilon:.3e}")]
    EpsilonTooLarge { energy: f64, budget: f64, max_epsilon: f64 },
    #[error("tubular neighbourhoods not separated: gap {gap:.4} < {required:.4}")]
    SeparationViolated { gap: f64, required: f64 },
    #[error("energy became non-finite at iteration {iteration}")]
    NumericalBlowup { iteration: usize },
    #[error("initial field does not match the Dirichlet data at {mismatches} nodes")]
    BoundaryMismatch { mismatches: usize },
    #[error("no admissible disc in band {band}; best value {best:.4}")]
    NoAdmissibleDisc { band: usize, best: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name, used in JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidUnitVector { .. } => "InvalidUnitVector",
            Error::NotAxisRotation { .. } => "NotAxisRotation",
            Error::NotTangent { .. } => "NotTangent",
            Error::ResolutionTooCoarse { .. } => "ResolutionTooCoarse",
            Error::OutsideDomain(_) => "OutsideDomain",
            Error::DegeneratePatch { .. } => "DegeneratePatch",
            Error::AmbiguousLift { .. } => "AmbiguousLift",
            Error::LiftObstruction { .. } => "LiftObstruction",
            Error::DegreeUnresolved { .. } => "DegreeUnresolved",
            Error::DegenerateTriangle => "DegenerateTriangle",
            Error::ValueNotRegular { .. } => "ValueNotRegular",
            Error::AntipodalInterpolation => "AntipodalInterpolation",
            Error::AlphaTooLarge { .. } => "AlphaTooLarge",
            Error::SegmentTooClose { .. } => "SegmentTooClose",
            Error::EpsilonTooLarge { .. } => "EpsilonTooLarge",
            Error::SeparationViolated { .. } => "SeparationViolated",
            Error::NumericalBlowup { .. } => "NumericalBlowup",
            Error::BoundaryMismatch { .. } => "BoundaryMismatch",
            Error::NoAdmissibleDisc { .. } => "NoAdmissibleDisc",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Format(_) => "FormatError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    /// True for errors caused by bad input or a violated guard (exit code 2).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::NumericalBlowup { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
