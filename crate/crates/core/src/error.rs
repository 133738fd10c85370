use thiserror::Error;

use crate::grid::Cell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty-sources: distance field needs at least one walkable source")]
    EmptySources,
    #[error("source cell {0:?} is not walkable")]
    SourceNotWalkable(Cell),
    #[error("not-grouped: agent {0} does not belong to a group")]
    NotGrouped(u32),
    #[error("spawn-overflow: {requested} agents do not fit into {capacity} spawn cells")]
    SpawnOverflow { requested: usize, capacity: usize },
    #[error("over-capacity: density {density} p/m² exceeds one agent per cell ({max} p/m²)")]
    OverCapacity { density: f64, max: f64 },
    #[error("invalid-geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no-dyads: the record contains no grouped agents")]
    NoDyads,
    #[error("incomplete-stats: missing class `{0}`")]
    IncompleteStats(&'static str),
    #[error("zero-length measurement window")]
    EmptyWindow,
    #[error("engine invariant violated at step {step}: {what}")]
    Invariant { step: u64, what: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
