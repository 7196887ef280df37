use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The revealed cells contradict every program in the space.
    #[error("no program is consistent with the revealed cells")]
    NoConsistentProgram,

    /// Every candidate utterance has zero speaker mass.
    #[error("no candidate utterance remains for the speaker")]
    EmptyCandidateSet,

    #[error("invalid program {choices:?}: {reason}")]
    InvalidProgram { choices: Vec<u8>, reason: String },

    #[error("invalid utterance: {0}")]
    InvalidUtterance(String),

    #[error("duplicate reveal at ({x}, {y})")]
    DuplicateCell { x: u8, y: u8 },

    #[error("unknown listener `{0}`")]
    UnknownListener(String),

    #[error("unknown nonterminal `{0}`")]
    UnknownNonterminal(String),

    #[error("listener {0} needs a trained model checkpoint")]
    ModelRequired(String),

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("line {line}: utterance {utterance} is not true of the target program")]
    InconsistentUtterance { line: usize, utterance: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
