use thiserror::Error;

pub type Result<T> = std::result::Result<T, KerrError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KerrError {
    #[error("invalid Fock dimension {0}: at least 2 levels are required")]
    InvalidDimension(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("resource limit exceeded: {what} = {value} > cap {cap}")]
    ResourceLimit { what: &'static str, value: usize, cap: usize },

    #[error("degenerate null space of dimension {nullity}")]
    Degenerate { nullity: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("integration failure at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("fit failure: {reason} (tau estimate {tau_estimate}, residual {residual}, span {span})")]
    Fit { reason: String, tau_estimate: f64, residual: f64, span: f64 },

    #[error("Mandel Q is undefined for zero mean photon number")]
    UndefinedMandelQ,

    #[error("slow mode has vanishing trace after orthogonalization")]
    TracelessMode,

    #[error("escape-rate formula is singular: denominator {denominator:e}")]
    SingularRate { denominator: f64 },

    #[error("escape rate has imaginary residue {imag:e} relative to real part {real:e}")]
    ImaginaryResidue { real: f64, imag: f64 },

    #[error("no barrier: parameters are outside the bistable regime")]
    NoBarrier,

    #[error("unstable minimum: curvature {curvature:e} at the low-amplitude well")]
    UnstableMinimum { curvature: f64 },

    #[error("degenerate geometry: stable and unstable roots coincide")]
    DegenerateGeometry,

    #[error("trajectory diverged at t = {time}: |alpha|^2 = {norm_sqr:e}")]
    Divergence { time: f64, norm_sqr: f64 },
}

impl From<ndarray_linalg::error::LinalgError> for KerrError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        KerrError::Linalg(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> KerrError {
    KerrError::InvalidParameter { name, reason: reason.into() }
}
