use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error, serde::Serialize)]
#[serde(tag = "error", content = "detail")]
pub enum Error {
    #[error("point ({u}, {v}) is outside the surface domain")]
    OutOfDomain { u: f64, v: f64 },
    #[error("jet order {requested} unavailable (max {max})")]
    OrderUnavailable { requested: usize, max: usize },
    #[error("umbilic point: k1 - k2 = {gap:e}")]
    UmbilicPoint { gap: f64 },
    #[error("degenerate first fundamental form")]
    DegenerateMetric,
    #[error("inversion center lies on the surface image")]
    InversionCenterOnSurface,
    #[error("stencil leaves the domain near ({u}, {v})")]
    BoundaryTooClose { u: f64, v: f64 },
    #[error("genericity denominator {value:e} below tolerance")]
    DegenerateDenominator { value: f64 },
    #[error("Dupin point: both conformal principal curvatures vanish")]
    DupinPoint,
    #[error("canal point: one conformal principal curvature vanishes")]
    CanalPoint,
    #[error("contact-order fit unstable (residual {residual:e})")]
    FitUnstable { residual: f64 },
    #[error("seed is a Dupin point")]
    SeedIsDupinPoint,
    #[error("Darboux angle degenerate at the seed")]
    AngleDegenerate,
    #[error("window too large: quartic terms {quartic:e} exceed quadratic {quadratic:e}")]
    WindowTooLarge { quartic: f64, quadratic: f64 },
    #[error("resolution {0} below minimum 16")]
    ResolutionTooLow(usize),
    #[error("kappa vanishes on the grid")]
    KappaZero,
    #[error("f1 left the positive cone at column {column}")]
    NonPositiveResult { column: usize },
    #[error("field {0} missing from grid")]
    MissingField(String),
    #[error("grid margin too small: need {needed} cells")]
    MarginTooSmall { needed: usize },
    #[error("tube radius {radius} exceeds curvature radius {limit}")]
    SelfIntersectingTube { radius: f64, limit: f64 },
    #[error("invalid surface specification: {0}")]
    InvalidSpec(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
