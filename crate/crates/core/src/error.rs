use thiserror::Error;

use crate::grid::DialSetting;

/// Malformed text input (landscape files, dial settings).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandscapeError {
    #[error("invalid landscape config: {0}")]
    InvalidConfig(String),
    #[error("could not place {peak_count} peaks after {candidates} candidates")]
    ConfigInfeasible { peak_count: usize, candidates: usize },
    #[error("invalid frame offset {offset} for {frame:?} frame")]
    InvalidOffset { frame: crate::landscape::Frame, offset: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HelperError {
    #[error("invalid helper config: {0}")]
    InvalidConfig(String),
    #[error("dial position {position} outside 0..{size}")]
    OutOfBounds { position: usize, size: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session is not active")]
    SessionNotActive,
    #[error("task {0} is a team task; submit only the left dial")]
    TaskIsTeamButFullSettingGiven(usize),
    #[error("task {0} is a solo task; submit both dials")]
    TaskIsSoloButSingleDialGiven(usize),
    #[error("nothing evaluated in task {0}")]
    NothingEvaluated(usize),
    #[error("session is not completed")]
    SessionNotCompleted,
    #[error("setting {0} is outside the dial range")]
    OutOfBounds(DialSetting),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("replay mismatch at event {sequence}: {detail}")]
    ReplayMismatch { sequence: u64, detail: String },
    #[error("malformed event log: {0}")]
    MalformedLog(String),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Helper(#[from] HelperError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("task {0} has not been finalized")]
    TaskNotFinalized(usize),
    #[error("task {task_index}: stored label of move {sequence} disagrees with its history")]
    LabelMismatch { task_index: usize, sequence: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("degenerate variance")]
    DegenerateVariance,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sample lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("design cell ({0}, {1}) is empty")]
    EmptyCell(usize, usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("task {0} does not exist")]
    UnknownTask(usize),
    #[error("task {0} has not been finalized")]
    TaskNotFinalized(usize),
}
