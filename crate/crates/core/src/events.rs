//! Append-only session event records.
//!
//! One record per line in persisted logs. Records are self-describing: the
//! `kind` tag names the variant and `payload` carries its fields.

use serde::{Deserialize, Serialize};

use crate::grid::DialSetting;
use crate::helper::HelperTurn;
use crate::landscape::Frame;
use crate::session::{DialInput, Evaluation, PeakKind, Phase, SessionConfig, TaskResult, Treatment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Event {
    SessionCreated {
        session_id: String,
        participant_id: String,
        master_seed: u64,
        treatment_override: Option<Treatment>,
        config: SessionConfig,
        treatment: Treatment,
    },
    TaskStarted {
        task_index: usize,
        phase: Phase,
        peaks: PeakKind,
        frame: Frame,
        offset: f64,
        anchor_value: Option<f64>,
        landscape_seed: u64,
    },
    HumanInput {
        task_index: usize,
        input: DialInput,
    },
    HelperQuery {
        task_index: usize,
        setting: DialSetting,
        raw_value: f64,
    },
    HelperChoice {
        task_index: usize,
        turn: HelperTurn,
    },
    Feedback {
        task_index: usize,
        evaluation: Evaluation,
    },
    Finalized {
        task_index: usize,
        /// Always written; optional in hand-authored logs.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result: Option<TaskResult>,
    },
    BonusComputed {
        bonus: f64,
    },
}

impl Event {
    /// Inputs drive a session; every other kind is derived from them.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Event::SessionCreated { .. } | Event::HumanInput { .. } | Event::Finalized { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Event::SessionCreated { .. } => "SessionCreated",
            Event::TaskStarted { .. } => "TaskStarted",
            Event::HumanInput { .. } => "HumanInput",
            Event::HelperQuery { .. } => "HelperQuery",
            Event::HelperChoice { .. } => "HelperChoice",
            Event::Feedback { .. } => "Feedback",
            Event::Finalized { .. } => "Finalized",
            Event::BonusComputed { .. } => "BonusComputed",
        }
    }

    /// Equality used when checking a recorded log against a replay; a
    /// recorded `Finalized` without a result matches any result.
    pub fn matches_recorded(&self, recorded: &Event) -> bool {
        match (recorded, self) {
            (
                Event::Finalized {
                    task_index: a,
                    result: None,
                },
                Event::Finalized { task_index: b, .. },
            ) => a == b,
            _ => recorded == self,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub session_id: String,
    pub sequence: u64,
    #[serde(flatten)]
    pub event: Event,
    /// Unix milliseconds for `SessionCreated`, milliseconds since session
    /// start for everything else. Never used in logic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<u64>,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Parses a newline-delimited log, skipping blank lines.
pub fn parse_log(text: &str) -> Result<Vec<EventRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(EventRecord::from_line)
        .collect()
}

pub fn write_log(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}
