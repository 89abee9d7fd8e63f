use crate::{ActorId, Year};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("relation contains a directed cycle")]
    Cycle,
    #[error("ground set has {0} elements, more than the {1} this representation supports")]
    GroundTooLarge(usize, usize),
    #[error("actor {0} is not in the ground set")]
    UnknownActor(ActorId),
    #[error("ground set of size {0} exceeds the counting limit {1}")]
    SizeLimit(usize, usize),
    #[error("list members do not match the order's ground set")]
    GroundMismatch,
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("actor {actor} has no covariate level in year {year}")]
    MissingCovariate { actor: ActorId, year: Year },
    #[error("actor {actor} has no authority value in year {year}")]
    MissingAuthority { actor: ActorId, year: Year },
    #[error("actor {actor} is not active in year {year}")]
    InactiveActor { actor: ActorId, year: Year },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(i32, i32),
    #[error("registration left no usable data")]
    EmptyDataset,
    #[error("prior fraction estimate is zero; Bayes factor undefined")]
    ZeroPriorMass,
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
