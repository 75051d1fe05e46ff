use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("invalid interval: a={a} must be below b={b}")]
    BadInterval { a: f64, b: f64 },
    #[error("level {n} exceeds the cap {cap}")]
    LevelCap { n: u32, cap: u32 },
    #[error("dimension {0} is too small")]
    TooSmall(usize),
    #[error("dimension {0} exceeds the memory guard")]
    TooLarge(usize),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("requested precision not reached: {0}")]
    Precision(String),
    #[error("level {0} is not suitable (f_m is not concave)")]
    NotSuitable(u32),
    #[error("word of length {0} does not polarize within the tolerance window")]
    NotPolarized(usize),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("cannot parse `{0}`")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
