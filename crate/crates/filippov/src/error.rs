//! Error type shared by every module.
//!
//! Variants name the violated hypothesis so that failed runs stay
//! diagnosable: a tangency or corner is not a bug, it is an orbit leaving the
//! crossing regime, and the report must say so.

use thiserror::Error;

/// Structured failure modes of the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A field, gradient or user map produced a non-finite value.
    #[error("evaluation of {what} failed at t = {t}: {reason}")]
    Evaluation { what: String, t: f64, reason: String },

    /// Flow-surface transversality could not be certified on one side.
    #[error("tangency suspected on surface {surface} at t = {t}: |<grad h, f>| = {value:.3e} below threshold {threshold:.3e}")]
    Tangency {
        surface: usize,
        t: f64,
        value: f64,
        threshold: f64,
    },

    /// More than one switching surface active within tolerance.
    #[error("corner: surfaces {surfaces:?} simultaneously active")]
    Corner { surfaces: Vec<usize> },

    /// `grad h` below the regularity threshold on an active surface.
    #[error("surface {surface} fails gradient regularity: |grad h| = {value:.3e}")]
    NonRegular { surface: usize, value: f64 },

    /// The sign table has no component for the queried side.
    #[error("region assignment has no component for sign vector {signs:?}")]
    UnassignedRegion { signs: Vec<i8> },

    /// Event count exceeded the cap; possible accumulation of crossings.
    #[error("event cap {cap} exceeded at t = {t}; crossing times may accumulate")]
    EventCap { cap: usize, t: f64 },

    /// Two consecutive events closer than the minimum-arc threshold.
    #[error("consecutive crossings separated by {gap:.3e} < {min_arc:.3e} at t = {t}; accumulation suspected")]
    EventAccumulation { gap: f64, min_arc: f64, t: f64 },

    /// Adaptive step size collapsed; the orbit is numerically singular.
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    /// Newton or another iteration failed to converge.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConvergent {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// A map orbit left the domain where the construction is valid.
    #[error("orbit left the admissible domain: {reason}")]
    DomainExit { reason: String },

    /// Fixed point fails the hyperbolicity margin.
    #[error("fixed point not hyperbolic: min | |alpha| - 1 | = {margin:.3e}")]
    NotHyperbolic { margin: f64 },

    /// A tangent vector has no usable component along the expanding
    /// directions, so the inclination quotient is undefined.
    #[error("tangent not transversal: {reason}")]
    NotTransversal { reason: String },

    /// Eigenstructure unusable for an adapted chart.
    #[error("eigenstructure degenerate: {reason}")]
    DegenerateSpectrum { reason: String },

    /// A geometric hypothesis of an experiment fails (clearance, angle, ...).
    #[error("hypothesis violated: {reason}")]
    Hypothesis { reason: String },

    /// Requested radius cannot be realized; the maximal clean value is reported.
    #[error("radius {requested:.3e} unusable ({reason}); largest admissible is {admissible:.3e}")]
    ShrinkRadius {
        requested: f64,
        admissible: f64,
        reason: String,
    },

    /// Malformed input: config, mesh, or disk data.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// I/O failure while reading configs or writing artifacts.
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short machine-readable kind tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Evaluation { .. } => "evaluation",
            Error::Tangency { .. } => "tangency",
            Error::Corner { .. } => "corner",
            Error::NonRegular { .. } => "non-regular-surface",
            Error::UnassignedRegion { .. } => "unassigned-region",
            Error::EventCap { .. } => "event-cap",
            Error::EventAccumulation { .. } => "event-accumulation",
            Error::StepUnderflow { .. } => "step-underflow",
            Error::NotConvergent { .. } => "not-convergent",
            Error::DomainExit { .. } => "domain-exit",
            Error::NotHyperbolic { .. } => "not-hyperbolic",
            Error::NotTransversal { .. } => "not-transversal",
            Error::DegenerateSpectrum { .. } => "degenerate-spectrum",
            Error::Hypothesis { .. } => "hypothesis-violation",
            Error::ShrinkRadius { .. } => "shrink-radius",
            Error::Invalid(_) => "invalid-input",
            Error::Io(_) => "io",
        }
    }
}
