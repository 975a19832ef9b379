use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A configuration value is invalid or inconsistent (bad FFT size,
    /// mismatched dimensions, unusable window/hop pair, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An input violates an operation's precondition (wrong channel count,
    /// empty prompt, out-of-range azimuth, too-short waveform, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Input is degenerate for the requested operation (e.g. a silent clip
    /// in SNR scaling); the caller should resample the scene.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A required data resource is missing or malformed (corpus entry,
    /// HRIR file, embedding sidecar, checkpoint component).
    #[error("data error: {0}")]
    Data(String),

    /// A conditioning provider is unavailable or cannot serve the prompt.
    #[error("provider error: {0}")]
    Provider(String),

    /// Non-finite values appeared during a numeric computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A metric is mathematically undefined for the given inputs.
    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    /// Internal invariant violated; indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
