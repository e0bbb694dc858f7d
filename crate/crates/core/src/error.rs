use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("unsupported derivative order {0} (expected 1 or 2)")]
    DerivativeOrder(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no bound state found in shooting bracket [{lo}, {hi}]")]
    NoBoundState { lo: f64, hi: f64 },

    #[error("iteration did not converge after {iterations} steps: {what}")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("singular linear system at row {0}")]
    Singular(usize),

    #[error("mode under-resolved: decay length spans {nodes:.1} nodes (need at least 8)")]
    UnderResolved { nodes: f64 },

    #[error("outside modulation regime near alpha = {alpha_guess}: {reason}")]
    OutsideModulationRegime { alpha_guess: f64, reason: String },

    #[error("causal window too small: support {support} + t_max {t_max} + margin {margin} >= r_max {r_max}")]
    CausalWindow {
        support: f64,
        t_max: f64,
        margin: f64,
        r_max: f64,
    },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("evolution undetermined at t = {t_reached}: {reason}")]
    Undetermined { t_reached: f64, reason: String },

    #[error("insufficient linear regime: window of {window:.3} time units, need {needed:.3}")]
    InsufficientWindow { window: f64, needed: f64 },

    #[error("reference trajectory ejected: {0}")]
    ReferenceEjected(String),

    #[error("degenerate tangent-plane projection: <g chi, g> = {0:e}")]
    DegenerateProjection(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
