use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid gamma index `{0}`")]
    InvalidGammaIndex(String),
    #[error("unknown site-factor label `{0}`")]
    UnknownLabel(String),
    #[error("dense expansion of {n_qudits} qudits exceeds the cap of {cap}")]
    DenseCapExceeded { n_qudits: usize, cap: usize },
    #[error("qudit {qudit} out of range for {n_qudits} qudits")]
    QuditOutOfRange { qudit: usize, n_qudits: usize },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("edge {0} is not on the lattice")]
    EdgeNotOnLattice(String),
    #[error("{0}")]
    SpinMismatch(String),
    #[error("model `{model}` is not supported by mapping `{kind}`")]
    IncompatibleModel { model: String, kind: String },
    #[error("Polyakov loops require a periodic lattice")]
    NotPeriodic,
    #[error("state of {n_qudits} qudits needs {required} bytes, budget is {budget} bytes")]
    MemoryBudget {
        n_qudits: usize,
        required: u128,
        budget: u128,
    },
    #[error("oracle with {n_modes} modes exceeds the cap of {cap}")]
    OracleTooLarge { n_modes: usize, cap: usize },
    #[error("invalid support: {0}")]
    InvalidSupport(String),
    #[error("matrix shape {rows}×{cols} does not match support of {k} qudits")]
    MatrixShape { rows: usize, cols: usize, k: usize },
    #[error("generator is not Hermitian (deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("state annihilated: squared norm {0:.3e}")]
    Annihilated(f64),
    #[error("state is not normalized: norm {0}")]
    Unnormalized(f64),
    #[error("terms `{a}` and `{b}` in group {group} do not commute")]
    NonCommutingGroup { group: String, a: String, b: String },
    #[error("spectra differ: {0}")]
    SpectraMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown initial-state case `{0}`")]
    UnknownCase(String),
    #[error("sector calibration failed: {0}")]
    Calibration(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
