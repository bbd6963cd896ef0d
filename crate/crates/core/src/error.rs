use thiserror::Error;

pub type Result<T, E = ScvtError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScvtError {
    #[error("point is at or near the antipode of the projection contact (t·(z+t) = {denominator:e})")]
    Antipode { denominator: f64 },

    #[error("degenerate triangle: vertices (nearly) coincide or are collinear")]
    DegenerateTriangle,

    #[error("all input points are collinear")]
    CollinearInput,

    #[error("duplicate input point (ids {first} and {second})")]
    DuplicatePoint { first: u32, second: u32 },

    #[error("region has only {count} points; at least 3 are required (enlarge the overlap)")]
    InsufficientPoints { count: usize },

    #[error("point {id} lies outside the cap it is being triangulated in")]
    PointOutsideCap { id: u32 },

    #[error("merged triangulation is not a closed sphere: {triangles} triangles for {points} points")]
    IncompleteTriangulation { points: usize, triangles: usize },

    #[error("longitude undefined: point is within 1e-9 of a pole")]
    PoleAmbiguity,

    #[error("Voronoi cell of generator {id} is truncated by the region boundary")]
    IncompleteCell { id: u32 },

    #[error("first moment of cell {id} vanishes; constrained centroid undefined")]
    CentroidAtOrigin { id: u32 },

    #[error("Lloyd preconditioner entry {id} is not positive (c·z = {value:e})")]
    NonpositiveDiagonal { id: u32, value: f64 },

    #[error("Laplacian factorization failed: {0}")]
    Factorization(String),

    #[error("search direction is not a descent direction (q·g = {slope:e})")]
    NonDescent { slope: f64 },

    #[error("line search found no decrease after {evaluations} evaluations")]
    LineSearchFailure { evaluations: usize },

    #[error("invalid triangle edge lengths ({a}, {b}, {c})")]
    InvalidTriangle { a: f64, b: f64, c: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ScvtError {
    fn from(err: std::io::Error) -> Self {
        ScvtError::Io(err.to_string())
    }
}

impl ScvtError {
    /// True for failures of the numerics, as opposed to bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            ScvtError::Config(_) | ScvtError::Parse { .. } | ScvtError::Io(_)
        )
    }
}
