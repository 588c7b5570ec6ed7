use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("matrix is not orthogonal (max |QᵀQ - I| = {defect:e})")]
    NotOrthogonal { defect: f64 },
    #[error("matrix is a reflection, not a rotation (det = {det})")]
    NotProperRotation { det: f64 },
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("agents coincide (distance {distance:e} m)")]
    CoincidentAgents { distance: f64 },
    #[error("distance must be positive, got {distance}")]
    NonPositiveDistance { distance: f64 },
    #[error("degenerate elevation angle (bearing cosine {cosine})")]
    DegenerateAngle { cosine: f64 },
    #[error("balls overlap: distance {distance} m <= 2 x radius {radius} m")]
    BallsOverlap { distance: f64, radius: f64 },
    #[error("rod height / ball radius must be positive, got {rho}")]
    NonPositiveRho { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph needs at least two vertices")]
    TooFewVertices,
    #[error("vertex {0} is out of range")]
    UnknownVertex(usize),
    #[error("edge {0} is a self-loop")]
    SelfLoop(usize),
    #[error("edge {0} duplicates an earlier edge")]
    DuplicateEdge(usize),
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("at least two leaders are required, got {0}")]
    TooFewLeaders(usize),
    #[error("leader count {leaders} leaves no room in {n} vertices")]
    TooManyLeaders { leaders: usize, n: usize },
}

/// A geometric failure attributed to one edge of the sensing graph.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("edge {edge} ({head}-{tail}): {source}")]
pub struct EdgeFault {
    /// 0-based edge index.
    pub edge: usize,
    pub head: usize,
    pub tail: usize,
    #[source]
    pub source: GeometryError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("follower has no neighbors")]
    EmptyNeighborhood,
    #[error("invalid gains: {0}")]
    InvalidGains(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("geometry fault at t = {t} s: {fault}")]
    GeometryFault { t: f64, fault: EdgeFault },
    #[error("desired formation is not infinitesimally rigid (rank {rank}, need {required})")]
    RigidityCheckFailed { rank: usize, required: usize },
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("vertex {0} is not a follower")]
    NotAFollower(usize),
    #[error("vertex {0} is not a leader")]
    NotALeader(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("R_E M R_Eᵀ has no positive eigenvalue")]
    NoPositiveEigenvalue,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
