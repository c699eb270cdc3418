use thiserror::Error;

/// Errors raised by the library. Variants map one-to-one onto the failure modes
/// of the individual operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph is disconnected: no path between {0} and {1}")]
    DisconnectedGraph(usize, usize),
    #[error("non-positive weight {value} at {what} {index}")]
    NonPositiveWeight {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("point id {0} out of range for space with {1} points")]
    BadPoint(usize, usize),
    #[error("ball normalizer is not positive ({0})")]
    EmptyBallNormalizer(f64),
    #[error("ball around {center} of radius {radius} has fewer than {needed} points")]
    BallTooSmall {
        center: usize,
        radius: f64,
        needed: usize,
    },
    #[error("geodesic endpoints coincide ({0})")]
    SamePoint(usize),
    #[error("parameter {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("restriction too short: length {length} below {minimum}")]
    TooShort { length: f64, minimum: f64 },
    #[error("space has no edge graph; geodesics need a graph metric")]
    NoGraph,
    #[error("point {0} has no neighbour within the lip scale")]
    EmptyNeighborhood(usize),
    #[error("local Lipschitz constant of distance field vanishes at {0}")]
    DegenerateLip(usize),
    #[error("supplied function does not represent the gradient along the geodesic (defect {defect}, slack {slack})")]
    NotRepresenting { defect: f64, slack: f64 },
    #[error("geodesic has zero speed")]
    ZeroSpeed,
    #[error("geodesics do not share a starting point ({0} vs {1})")]
    DifferentStart(usize, usize),
    #[error("pair (s={s}, t={t}) violates the cone constraint with C={c}")]
    ConeViolation { s: f64, t: f64, c: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("transport solver failed: {0}")]
    SolverFailure(String),
    #[error("dynamical plan exceeds compression bound: density {density} > {bound}")]
    CompressionViolation { density: f64, bound: f64 },
    #[error("angle denominator vanishes")]
    ZeroDenominator,
    #[error("start point {0} carries more than one transport atom")]
    NonUniqueAtom(usize),
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("solver did not converge: residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("invalid Dirichlet problem: {0}")]
    InvalidProblem(String),
    #[error("pole {pole} lies within distance {minimum} of the centre")]
    PoleTooClose { pole: usize, minimum: f64 },
    #[error("geodesic to {0} is not extendable beyond the base point")]
    NotExtendable(usize),
    #[error("metric axiom violated: {0}")]
    MetricViolation(String),
    #[error("oracle undefined: {0}")]
    OracleUndefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
