use thiserror::Error;

/// Errors produced anywhere in the selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A record references a parent that appears later in the file (or not
    /// at all); pedigrees must be topologically ordered.
    #[error("record {child} references parent {parent} not defined earlier")]
    Order { child: u32, parent: u32 },

    #[error("duplicate id {0}")]
    DuplicateId(u32),

    /// Mendelian sampling variance collapsed; the pedigree is corrupt or
    /// degenerately inbred.
    #[error("mendelian sampling variance {d:e} at individual {index} is below tolerance")]
    Singularity { index: usize, d: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The bounds fixed every variable; the carried vector is the fully
    /// determined contribution vector.
    #[error("all variables fixed by bounds; solution determined without solving")]
    Degenerate { x: Vec<f64> },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
