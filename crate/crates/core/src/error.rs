use thiserror::Error;

/// Errors raised by the kinetic operators, solvers and diagnostics.
#[derive(Debug, Error)]
pub enum KineticError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("undefined deviation angle: pre-collision velocities coincide")]
    UndefinedDeviationAngle,

    #[error("points per axis must be even, got {0}")]
    OddGrid(usize),

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("Bose condensation regime not representable: {0}")]
    BoseCondensation(String),

    #[error("Fermi overflow for species {species} at node {node}: f = {value} > 1")]
    FermiOverflow {
        species: usize,
        node: usize,
        value: f64,
    },

    #[error("nonpositive density: {0}")]
    NonPositiveDensity(String),

    #[error("singular constraint Gram matrix in conservative projection")]
    SingularProjection,

    #[error("degenerate sample family: every sample has a vanishing right-hand side")]
    DegenerateSampleFamily,

    #[error("resolution insufficient: clipped mass {clipped:e} exceeds 1e-3 of species mass {mass:e}")]
    ResolutionInsufficient { clipped: f64, mass: f64 },

    #[error("unresolved angular quadrature: {nodes} nodes inside the kernel support, at least 16 required")]
    UnresolvedAngularQuadrature { nodes: usize },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KineticError>;

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(KineticError::Precondition(msg.into()))
}
