use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid id token {0:?}: ids must be non-empty and contain no commas, quotes or whitespace")]
    InvalidId(String),

    #[error("duplicate observation for user {user:?}, element {element:?}")]
    DuplicatePair { user: String, element: String },

    #[error("non-finite score for user {user:?}, element {element:?}")]
    NonFiniteScore { user: String, element: String },

    #[error("score {score} for user {user:?}, element {element:?} outside [{lo}, {hi}]")]
    ScoreOutOfRange {
        user: String,
        element: String,
        score: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unknown user id {0:?}")]
    UnknownUser(String),

    #[error("unknown element id {0:?}")]
    UnknownElement(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index sets differ: {0}")]
    IndexMismatch(String),

    #[error("training diverged at epoch {epoch} (objective {objective})")]
    Diverged { epoch: usize, objective: f64 },

    #[error("user {0:?} has no training observations")]
    ColdStart(String),

    #[error("ground-truth factor draw was degenerate after {0} attempts")]
    DegenerateDraw(usize),

    #[error("user {0:?} has an incomplete row")]
    IncompleteRow(String),

    #[error("unknown event type {0:?}")]
    UnknownEventType(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map_or(0, |p| p.line() as usize);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::parse(line, format!("{other:?}")),
        }
    }
}
