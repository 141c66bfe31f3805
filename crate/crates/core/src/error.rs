use thiserror::Error;

/// Errors produced while assembling, coarsening or solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("nonpositive diagonal entry in row {row}")]
    NonPositiveDiagonal { row: usize },

    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(String),

    #[error("degenerate element {element} (zero measure)")]
    DegenerateElement { element: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nodal prolongator row {row} has zero row sum")]
    ZeroRowSum { row: usize },

    #[error("column {col} of the nodal prolongator cannot be assigned any row")]
    EmptyColumn { col: usize },

    #[error("malformed gradient: row {row} of {which} has absolute row sum {sum}")]
    MalformedGradient {
        which: &'static str,
        row: usize,
        sum: f64,
    },

    #[error("empty constraint subproblem for fine edge {edge}: {reason}")]
    EmptySubproblem { edge: usize, reason: &'static str },

    #[error("constraint subproblem for fine edge {edge} has numerical rank below {expected}")]
    RankMismatch { edge: usize, expected: usize },

    #[error("no factored subproblem for fine edge {edge}")]
    MissingFactor { edge: usize },

    #[error("coarsening stagnated on level {level}: {fine} fine edges -> {coarse} coarse edges")]
    CoarseningStagnation {
        level: usize,
        fine: usize,
        coarse: usize,
    },

    #[error("coarsest-level matrix is singular")]
    SingularMatrix,

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("matrix market, line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
