use thiserror::Error;

/// Errors raised by the numerical operations in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("band limit {band} needs at least {needed} circle nodes, grid has {nodes}")]
    GridTooSmall {
        band: usize,
        nodes: usize,
        needed: usize,
    },

    #[error("coefficient array has length {found}, band limit {band} needs {expected}")]
    CoefficientLength {
        band: usize,
        expected: usize,
        found: usize,
    },

    #[error("sample array has length {found}, expected {expected}")]
    SampleLength { expected: usize, found: usize },

    #[error("point ({0}, {1}) is not on the unit circle")]
    NotOnCircle(f64, f64),

    #[error("the pole (0, -1) has no stereographic preimage")]
    Pole,

    #[error("field has no declared value at infinity, the pole sample is undetermined")]
    PoleUndetermined,

    #[error("x = {x} lies outside the line grid [-{radius}, {radius}]")]
    OutsideGrid { x: f64, radius: f64 },

    #[error("evaluation at x = {x} with truncation {truncation} leaves the grid radius {radius}")]
    QuadratureWindow { x: f64, truncation: f64, radius: f64 },

    #[error("field is not in the decaying class: |f| (1 + x^2) = {observed} at x = {x} exceeds {bound}")]
    NotDecaying { x: f64, observed: f64, bound: f64 },

    #[error("non-finite sample at node {index}")]
    NonFinite { index: usize },

    #[error("sample {index} has modulus {modulus}, expected a unit complex number")]
    NotUnitModulus { index: usize, modulus: f64 },

    #[error("field is not tangent to U at node {index}: v . U = {dot}")]
    NotTangent { index: usize, dot: f64 },

    #[error("phase jump {jump} between samples {index} and {next} is not resolved")]
    UnderResolved { index: usize, next: usize, jump: f64 },

    #[error("band limit {band} is below the minimum {min}")]
    BandTooSmall { band: usize, min: usize },

    #[error("expected winding degree {expected}, found {found}")]
    DegreeMismatch { expected: i64, found: i64 },

    #[error("kernel dimension is {found}, correspondence needs {expected}")]
    KernelDimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("retraction failed at iteration {iteration}: step shrank to {step} without a valid update")]
    RetractionFailed { iteration: usize, step: f64 },

    #[error("winding degree jumped from {from} to {to} at iteration {iteration}")]
    DegreeJump { iteration: usize, from: i64, to: i64 },

    #[error("singular value decomposition failed to converge")]
    SvdFailed,

    #[error("report output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;
