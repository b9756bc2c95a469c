use thiserror::Error;

/// Errors raised by the calculus engine, the gauge constructions and the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid size {0}: must be even and >= 8")]
    InvalidGrid(usize),
    #[error("fields or symbols live on different grids ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },
    #[error("multiplier is not finite at retained mode {0}")]
    NonFiniteMultiplier(i64),
    #[error("forward differences of order {order} leave the lattice of {n_points} points")]
    DomainTooSmall { order: usize, n_points: usize },
    #[error("all probe outputs are below {floor:e}")]
    DegenerateProbe { floor: f64 },
    #[error("flow norm {norm:e} exceeds the a priori bound {bound:e}")]
    GeneratorUnstable { norm: f64, bound: f64 },
    #[error("small divisor {value:e} at (eta={eta}, xi={xi}), threshold {threshold:e}")]
    SmallDivisor {
        eta: i64,
        xi: i64,
        value: f64,
        threshold: f64,
    },
    #[error("Neumann series increments grew for 3 consecutive terms (last {last:e})")]
    NeumannDivergence { last: f64 },
    #[error("time-dependent series stalled at increment {increment:e} after {terms} terms")]
    SeriesStalled { increment: f64, terms: usize },
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("data seminorm {value:e} exceeds the smallness threshold {threshold:e}")]
    SmallnessViolated { value: f64, threshold: f64 },
    #[error("time tameness violated: measured ratio {ratio:e} at derivative order {order}")]
    TamenessViolated { ratio: f64, order: usize },
    #[error("non-finite value detected at t = {t}")]
    NanDetected { t: f64 },
    #[error("rescaled spectrum leaves the lattice (mode {mode})")]
    SpectrumOverflow { mode: i64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
