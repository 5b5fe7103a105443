use thiserror::Error;

/// Errors produced by grid construction, field operations, the scanners and
/// the solver. File/CSV I/O failures are wrapped rather than re-exposed as
/// `std::io::Error` so callers can match on a single type.
#[derive(Debug, Error)]
pub enum FbError {
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty ball: no active node inside B({center:?}, {radius})")]
    EmptyBall { center: Vec<f64>, radius: f64 },

    #[error("ball out of domain: B({center:?}, {radius}) exceeds the grid")]
    BallOutOfDomain { center: Vec<f64>, radius: f64 },

    #[error("not complementary: supports of h1 and h2 overlap at {overlap} of {total} nodes")]
    NotComplementary { overlap: usize, total: usize },

    #[error("boundary condition violated: |u| = {max_trace:e} on the flat boundary")]
    BoundaryViolated { max_trace: f64 },

    #[error("out-of-domain sampling at {point:?}")]
    OutOfDomain { point: Vec<f64> },

    #[error("bump support touching boundary: center {center:?}, radius {radius}")]
    BumpTouchesBoundary { center: Vec<f64>, radius: f64 },

    #[error("inner solver diverged: residual grew over {0} consecutive sweeps")]
    InnerDiverged(usize),

    #[error("origin not a free boundary point: nearest free-boundary point at distance {nearest:e}")]
    OriginNotContact { nearest: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, FbError>;

impl FbError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        FbError::Io {
            path: path.into(),
            source,
        }
    }
}
