use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(&'static str),

    #[error("unknown model `{0}`")]
    UnknownModel(alloc::string::String),

    #[error("level {requested} exceeds the finest available data level {finest}")]
    Resolution { requested: u32, finest: u32 },

    #[error("time {requested} exceeds the data horizon {horizon}")]
    Horizon { requested: usize, horizon: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("coupled kernels require level >= 1")]
    Level,

    #[error("all particle weights collapsed at time {time}")]
    Degenerate { time: usize },

    #[error("invalid probability mass function")]
    InvalidPmf,

    #[error("the exact oracle only supports linear-Gaussian models")]
    UnsupportedModel,
}
