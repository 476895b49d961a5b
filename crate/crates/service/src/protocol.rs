//! Request and response bodies of the wire protocol. Every body carries
//! `v`, the protocol version.

use serde::{Deserialize, Serialize};

use rsl_core::export::LayeredGrid;
use rsl_core::landscape::Frame;
use rsl_core::session::{Evaluation, PeakKind, Phase, Session, SessionState, TaskResult, Treatment};
use rsl_core::{dial_letter, DialSetting};

pub const PROTOCOL_VERSION: u32 = 1;

fn version() -> u32 {
    PROTOCOL_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    #[serde(default = "version")]
    pub v: u32,
    pub participant_id: String,
    /// Falls back to the server's seed.
    #[serde(default)]
    pub master_seed: Option<u64>,
    /// Operator override of the randomized treatment.
    #[serde(default)]
    pub treatment: Option<TreatmentBody>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentBody {
    pub frame: Frame,
    pub anchored: bool,
}

impl From<TreatmentBody> for Treatment {
    fn from(t: TreatmentBody) -> Self {
        Treatment {
            frame: t.frame,
            anchored: t.anchored,
        }
    }
}

/// Solo tasks take both dials; team tasks take only `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    #[serde(default = "version")]
    pub v: u32,
    pub x: usize,
    #[serde(default)]
    pub y: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingBody {
    pub x: usize,
    pub y: usize,
    /// Letter readout such as `[A,D]`.
    pub label: String,
}

impl From<DialSetting> for SettingBody {
    fn from(s: DialSetting) -> Self {
        Self {
            x: s.x,
            y: s.y,
            label: format!("[{},{}]", dial_letter(s.x), dial_letter(s.y)),
        }
    }
}

/// One row of the participant's feedback history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRow {
    pub sequence: usize,
    pub setting: SettingBody,
    pub value: f64,
    /// Set on team tasks: the right dial the helper settled on.
    pub helper_dial: Option<usize>,
}

impl From<&Evaluation> for FeedbackRow {
    fn from(e: &Evaluation) -> Self {
        Self {
            sequence: e.sequence,
            setting: e.setting.into(),
            value: e.displayed_value,
            helper_dial: e.helper_dial,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub index: usize,
    pub phase: Phase,
    pub peaks: PeakKind,
    /// Present only for anchored participants.
    pub anchor_value: Option<f64>,
    pub history: Vec<FeedbackRow>,
    pub finalized: Option<FinalChoice>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalChoice {
    pub setting: SettingBody,
    pub value: f64,
}

impl From<&TaskResult> for FinalChoice {
    fn from(r: &TaskResult) -> Self {
        Self {
            setting: r.final_setting.into(),
            value: r.displayed_score,
        }
    }
}

/// Everything the participant view needs; raw elevations stay server-side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub v: u32,
    pub session_id: String,
    pub participant_id: String,
    pub state: SessionState,
    pub task_count: usize,
    /// The open task, or the one just finalized while between tasks.
    pub task: TaskView,
    /// Phase of the task the next evaluation goes to, if any.
    pub next_phase: Option<Phase>,
    pub initial_dial: SettingBody,
    pub dial_size: usize,
    pub bonus: Option<f64>,
}

impl SessionView {
    pub fn of(s: &Session) -> Self {
        let spec = s.current();
        let record = s.current_record();
        let next_phase = match s.state {
            SessionState::Active => Some(spec.phase),
            SessionState::BetweenTasks => Some(s.tasks[s.current_task + 1].phase),
            SessionState::Completed => None,
        };
        Self {
            v: PROTOCOL_VERSION,
            session_id: s.session_id.clone(),
            participant_id: s.participant_id.clone(),
            state: s.state,
            task_count: s.tasks.len(),
            task: TaskView {
                index: spec.index,
                phase: spec.phase,
                peaks: spec.peaks,
                anchor_value: spec.anchor_value,
                history: record.history.iter().map(FeedbackRow::from).collect(),
                finalized: record.result.as_ref().map(FinalChoice::from),
            },
            next_phase,
            initial_dial: s.config.initial_dial.into(),
            dial_size: spec.landscape.landscape.config.width,
            bonus: s.bonus().ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub v: u32,
    pub task_index: usize,
    pub feedback: FeedbackRow,
    pub session: SessionView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalizeResponse {
    pub v: u32,
    pub task_index: usize,
    pub choice: FinalChoice,
    pub session: SessionView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BonusResponse {
    pub v: u32,
    pub bonus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayersResponse {
    pub v: u32,
    pub session_id: String,
    pub task_index: usize,
    pub grid: LayeredGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub v: u32,
    pub status: String,
    pub sessions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub v: u32,
    pub error: String,
    pub message: String,
}
