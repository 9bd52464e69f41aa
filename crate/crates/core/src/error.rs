use thiserror::Error;

/// Errors raised while parsing an algorithm file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate rule label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: undeclared color `{color}`")]
    UndeclaredColor { line: usize, color: char },
    #[error("line {line}: guard cell ({di},{dj}) lies outside the visibility ball")]
    OutsideBall { line: usize, di: i32, dj: i32 },
    #[error("initial configuration holds {found} robots but `robots` declares {declared}")]
    RobotCount { declared: usize, found: usize },
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("invalid grid {m}x{n}: {reason}")]
    InvalidGrid { m: usize, n: usize, reason: String },
    #[error("grid {m}x{n} is below the algorithm minimum {min_m}x{min_n}")]
    GridBelowMinimum {
        m: usize,
        n: usize,
        min_m: usize,
        min_n: usize,
    },
    #[error("invalid color `{0}`: colors are single ASCII uppercase letters")]
    InvalidColor(char),
    #[error("robot not present: no robot of color {color} at ({i},{j})")]
    RobotNotPresent { i: usize, j: usize, color: char },
    #[error("guard/view phi mismatch: guard has phi={guard}, view has phi={view}")]
    PhiMismatch { guard: u8, view: u8 },
    #[error("unsupported visibility range {0}: only 1 and 2 are supported")]
    UnsupportedPhi(u8),
    #[error("inconsistent configuration: {0}")]
    InconsistentConfiguration(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("split unsound for this algorithm: {0}")]
    SplitUnsound(String),
    #[error("rule {rule} moves a robot off the grid")]
    MoveOffGrid { rule: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
