//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bit stream length {len} is not a multiple of {bits_per_symbol} bits/symbol")]
    BitLengthMismatch { len: usize, bits_per_symbol: usize },

    #[error("unsupported constellation order {0} (expected 4 or 16)")]
    UnsupportedOrder(usize),

    #[error("empty waveform")]
    EmptyWaveform,

    #[error("payload has {got} values but the subcarrier band holds {want}")]
    PayloadSizeMismatch { got: usize, want: usize },

    #[error("spectrum is not Hermitian-symmetric (bin {bin}, deviation {dev:.3e})")]
    NonHermitianSpectrum { bin: usize, dev: f64 },

    #[error("invalid modem geometry: {0}")]
    BadDmtConfig(String),

    #[error("waveform too short: need {need} samples from offset {offset}, have {have}")]
    WaveformTooShort {
        need: usize,
        offset: usize,
        have: usize,
    },

    #[error("drive goes non-positive (min {min:.3e}); lower the modulation index or raise the bias")]
    BiasTooSmall { min: f64 },

    #[error("scenario is invalid: {0}")]
    BadScenario(String),

    #[error("field/scenario mismatch: {0}")]
    FieldMismatch(String),

    #[error("detector sees no light; cannot meet a received-power setpoint")]
    DarkDetector,

    #[error("resample factors must be positive and coprime, got {p}/{q}")]
    BadResampleFactors { p: usize, q: usize },

    #[error("no synchronization peak above {threshold} (best {best:.3})")]
    SyncNoPeak { threshold: f64, best: f64 },

    #[error("channel estimation needs at least 2 training symbols, got {got}")]
    TooFewTrainingSymbols { got: usize },

    #[error("length mismatch: {what} ({a} vs {b})")]
    LengthMismatch {
        what: &'static str,
        a: usize,
        b: usize,
    },

    #[error("mode group |l|={l} not present in table `{table}`")]
    UnknownGroup { l: usize, table: String },

    #[error("crosstalk tables leave no fiber contribution for pair ({a},{b})")]
    NoFiberContribution { a: usize, b: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("noise calibration could not bracket the target: {0}")]
    CalibrationBracket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
