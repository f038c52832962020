use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid too small: G = {grid} but 8 * degree = {needed}")]
    GridTooSmall { grid: usize, needed: u64 },
    #[error("grid size {0} is not a power of two")]
    GridNotPow2(usize),
    #[error("grid size {needed} exceeds the cap {cap}")]
    GridCap { needed: u64, cap: usize },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("frequency collision at {0}")]
    Collision(i64),
    #[error("infeasible: best achievable {best:e} does not beat {target:e}")]
    Infeasible { best: f64, target: f64 },
    #[error("atom at {0} lies outside the admissible interval")]
    AtomOutOfRange(f64),
    #[error("not a probability density: {0}")]
    NotDensity(String),
    #[error("degenerate Orlicz function: {0}")]
    DegenerateOrlicz(String),
    #[error("parameter search exhausted: {0}")]
    SearchExhausted(String),
    #[error("schedule violation at stage {stage}: increment {increment:e} vs budget {budget:e}")]
    ScheduleViolation { stage: usize, increment: f64, budget: f64 },
    #[error("near-inverse failure: best residual {residual:e} at degree {degree}")]
    NearInverse { residual: f64, degree: usize },
    #[error("kernel truncation: tail mass {0:e}")]
    KernelTruncation(f64),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
