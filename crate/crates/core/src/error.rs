use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A density was evaluated with a fit from the wrong family.
    #[error("invalid family: expected {expected}, got {got}")]
    InvalidFamily { expected: &'static str, got: &'static str },

    /// Double-sided Weibull density at its location point with shape < 1.
    #[error("singular point: density unbounded at the location for shape {shape}")]
    SingularPoint { shape: f64 },

    /// Sample variance too small to normalize or fit.
    #[error("degenerate sample: variance {variance:.3e} below 1e-12")]
    DegenerateSample { variance: f64 },

    /// Fewer samples than the fitting procedure needs.
    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// Parameter outside its documented domain.
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },

    /// Paired vectors of different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Codebook design hit the sweep limit while centers were still moving.
    #[error("design did not converge: movement {movement:.3e} after {sweeps} sweeps (tol {tol:.3e})")]
    NonConvergence { movement: f64, tol: f64, sweeps: usize },

    /// Table construction failed at a specific grid point.
    #[error("table design failed at shape {shape}, rate {rate}, M {m}: {source}")]
    TableDesign { shape: f64, rate: u8, m: f64, source: Box<Error> },

    /// Lookup asked the table for an entry it does not hold.
    #[error("table mismatch: no entry for {what}")]
    TableMismatch { what: String },

    /// Code index outside the codebook.
    #[error("index out of range: code {index} for {levels} levels")]
    IndexOutOfRange { index: u32, levels: usize },

    /// Vector length disagrees with a bound dimension.
    #[error("dimension mismatch: got {got}, operator bound to {bound}")]
    DimensionMismatch { got: usize, bound: usize },

    /// Uniform codebook over an empty range.
    #[error("degenerate range: min {min} must be strictly below max {max}")]
    DegenerateRange { min: f64, max: f64 },

    /// Wire bytes do not start with the expected magic.
    #[error("invalid magic: not a compressed-update frame")]
    InvalidMagic,

    /// Wire frame written by an incompatible format version.
    #[error("version mismatch: frame version {found}, supported {supported}")]
    VersionMismatch { found: u8, supported: u8 },

    /// Wire frame ended before its declared contents.
    #[error("truncated stream: needed {needed} more bytes")]
    TruncatedStream { needed: usize },

    /// Wire frame decoded but its fields are inconsistent.
    #[error("malformed payload: {0}")]
    MalformedPayload(String),

    /// Scheme tag not known to this build.
    #[error("unknown scheme: {0}")]
    UnknownScheme(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
