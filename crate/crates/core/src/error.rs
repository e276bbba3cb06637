use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The right-hand side returned a non-finite value.
    #[error("non-finite field value at x = {x}, lambda = {lambda}")]
    DomainViolation { x: f64, lambda: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The state left the escape bound during integration.
    #[error("trajectory escaped |x| <= {bound} at t = {t} (x = {x})")]
    Divergence { t: f64, x: f64, bound: f64 },

    /// The adaptive step size collapsed below the representable resolution.
    #[error("step size underflow at t = {t} (h = {h})")]
    Stiffness { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("({x}, {lambda}) is not an equilibrium: |f| = {residual}")]
    NotAnEquilibrium { x: f64, lambda: f64, residual: f64 },

    #[error("equilibrium ({x}, {lambda}) is not linearly stable (df = {df})")]
    NotStable { x: f64, lambda: f64, df: f64 },

    /// Bifurcation points accumulate or sit on the ends of the parameter range.
    #[error("irregular bifurcation diagram: {0}")]
    DiagramIrregular(String),

    /// A stable path reached a bifurcation point with no stable way onward.
    #[error("stable path dead-ends at bifurcation point {point} (x = {x}, lambda = {lambda})")]
    DeadEnd { point: usize, x: f64, lambda: f64 },

    #[error("ambiguous routing at bifurcation point {point}: {candidates} stable continuations")]
    AmbiguousRouting { point: usize, candidates: usize },

    #[error("stable path left the diagram at lambda = {lambda}: {reason}")]
    PathBroken { lambda: f64, reason: String },

    #[error("pullback attractor unresolved after {retries} horizon doublings (deviation {deviation:e})")]
    PullbackUnresolved { retries: usize, deviation: f64 },

    #[error("pseudo-orbit construction failed at s = {s}: {reason}")]
    ConstructionFailure { s: f64, reason: String },

    /// Connectivity through a bifurcation of class `Other` needs an explicit routing decision.
    #[error("route touches bifurcation point {point} of class Other; manual routing required")]
    NeedsManualRouting { point: usize },

    #[error("basin sign check failed at x = {x}: {reason}")]
    BasinSign { x: f64, reason: String },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("unknown identifier `{name}` at column {column}")]
    UnknownIdentifier { name: String, column: usize },

    #[error("function `{name}` takes {expected} argument(s), got {found} (column {column})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        column: usize,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable kebab-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DomainViolation { .. } => "domain-violation",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Divergence { .. } => "divergence",
            Error::Stiffness { .. } => "stiffness",
            Error::StepLimit { .. } => "step-limit",
            Error::NotAnEquilibrium { .. } => "not-an-equilibrium",
            Error::NotStable { .. } => "not-stable",
            Error::DiagramIrregular(_) => "diagram-irregular",
            Error::DeadEnd { .. } => "dead-end",
            Error::AmbiguousRouting { .. } => "ambiguous-routing",
            Error::PathBroken { .. } => "path-broken",
            Error::PullbackUnresolved { .. } => "pullback-unresolved",
            Error::ConstructionFailure { .. } => "construction-failure",
            Error::NeedsManualRouting { .. } => "needs-manual-routing",
            Error::BasinSign { .. } => "basin-sign",
            Error::Parse { .. } => "parse",
            Error::UnknownIdentifier { .. } => "unknown-identifier",
            Error::Arity { .. } => "arity",
            Error::Io(_) => "io",
        }
    }

    /// Errors caused by malformed input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Parse { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
