use crate::fk::FkSolution;
use crate::statics::TensionVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cable index {0} out of range (expected 1..=8)")]
    CableIndex(usize),

    #[error("cable {cable} is degenerate (length {length:e} m)")]
    DegenerateCable { cable: usize, length: f64 },

    #[error("cable {cable} has non-positive length {length} m")]
    NonPositiveLength { cable: usize, length: f64 },

    /// Carries the best iterate found before giving up.
    #[error("forward kinematics did not converge (residual {:e} m after {} iterations)", .best.residual_norm, .best.iterations)]
    NotConverged { best: Box<FkSolution> },

    /// Carries the nearest non-negative tension vector and the wrench residual it leaves.
    #[error("wrench is not feasible with non-negative tensions (residual {residual:e})")]
    Infeasible { residual: f64, best: Box<TensionVector> },

    #[error("no torque equilibrium found after {iterations} iterations (residual {residual:e} N·m)")]
    NoEquilibrium { iterations: usize, residual: f64 },

    #[error("clutch is disengaged")]
    ClutchDisengaged,

    #[error("end-effector is outside the virtual wall (value {0:.3})")]
    OutsideWall(f64),

    #[error("repulsion direction undefined at the wall center")]
    AtCenter,

    #[error("too few member samples for an ellipsoid fit ({found} < {required})")]
    TooFewMembers { found: usize, required: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
