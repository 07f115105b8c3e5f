use crate::intervals_tm::Interval;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precision exhausted: {cancelled} digits cancel out of {digits}, at least {required} must survive")]
    PrecisionExhausted { digits: u32, cancelled: u32, required: u32 },

    #[error("quadrature did not converge (estimated error {estimate:e})")]
    QuadratureNonconvergence { estimate: f64 },

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported network structure: {0}")]
    Structure(String),

    #[error("schema violation at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("pre-activation bound {bound} exceeds the expansion domain [-{vmax}, {vmax}]")]
    DomainExceeded { bound: Interval, vmax: f64 },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("replication did not converge: final loss {final_loss:e} above floor {floor:e}")]
    NonConvergence { final_loss: f64, floor: f64 },

    #[error("domain mismatch between Taylor models")]
    DomainMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
