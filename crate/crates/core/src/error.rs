use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {0}")]
    InputTooShort(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate reference: target signal is all zeros")]
    DegenerateReference,
    #[error("insufficient beats: need at least 3, got {0}")]
    InsufficientBeats(usize),
    #[error("song too short for crop: {id} lasts {duration_s:.3} s, crop needs {length_s:.3} s from a downbeat")]
    SongTooShort {
        id: String,
        duration_s: f64,
        length_s: f64,
    },
    #[error("candidate pool underfilled: have {have}, need {need}")]
    PoolUnderfilled { have: usize, need: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("silent segment after {0} retries")]
    SilentSegment(usize),
    #[error("optimization diverged at step {0}")]
    Diverged(usize),
    #[error("invalid weights file: {0}")]
    Weights(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
