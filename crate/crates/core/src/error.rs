use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("time {t} ns lies outside the pulse window [0, {duration}] ns")]
    OutOfPulseWindow { t: f64, duration: f64 },

    #[error("unsupported transfer model: {0}")]
    UnsupportedTransfer(String),

    #[error("Hilbert space dimension {dim} exceeds the configured maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("unknown basis label `{0}`")]
    UnknownLabel(String),

    #[error("{what} drifted by {drift:.3e} (tolerance {tol:.1e})")]
    NormDrift { what: &'static str, drift: f64, tol: f64 },

    #[error("alpha ODE residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    AlphaResidual { residual: f64, tol: f64 },

    #[error(
        "modulation frequency {omega_phi} GHz is within {guard} GHz of the sideband |Delta|/{order} = {sideband} GHz"
    )]
    SidebandProximity { omega_phi: f64, order: u32, sideband: f64, guard: f64 },

    #[error("drive sum frequency {omega} GHz is within {guard} GHz of the detuning pole {pole} GHz")]
    DispersivePole { omega: f64, pole: f64, guard: f64 },

    #[error("adiabatic approximation invalid: max |d ln Delta/dt| / |Delta| = {ratio:.3e}")]
    AdiabaticityViolated { ratio: f64 },

    #[error("no resonance found within the scanned range: {0}")]
    NoResonance(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("leakage spectrum not resolvable: {0}")]
    UnresolvedSpectrum(String),

    #[error("channel is not trace preserving: deviation {deviation:.3e} exceeds leakage {leakage:.3e}")]
    NotTracePreserving { deviation: f64, leakage: f64 },

    #[error("non-physical channel: {0}")]
    NonPhysicalChannel(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::OutOfPulseWindow { .. }
                | Error::UnsupportedTransfer(_)
                | Error::DimensionTooLarge { .. }
                | Error::UnknownLabel(_)
                | Error::Config(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
