//! The experiment session state machine.
//!
//! A session holds one participant's treatment and four tasks: two solo tasks
//! followed by two team tasks, each phase containing one single-peak and one
//! four-peak landscape in random order. All randomness derives from the
//! participant id and master seed, so a session can be rebuilt from its
//! input events alone.

use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SessionError;
use crate::events::{Event, EventRecord};
use crate::grid::DialSetting;
use crate::helper::{HelperConfig, HelperState};
use crate::landscape::{self, apply_frame, Frame, FramedLandscape, LandscapeConfig};
use crate::metrics::{classify, MoveClass};

pub const TASK_COUNT: usize = 4;

/// Largest bonus paid, in dollars.
pub const MAX_BONUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Treatment {
    pub frame: Frame,
    pub anchored: bool,
}

impl Treatment {
    pub const ALL: [Treatment; 4] = [
        Treatment {
            frame: Frame::Gain,
            anchored: false,
        },
        Treatment {
            frame: Frame::Gain,
            anchored: true,
        },
        Treatment {
            frame: Frame::Loss,
            anchored: false,
        },
        Treatment {
            frame: Frame::Loss,
            anchored: true,
        },
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Solo,
    Team,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakKind {
    One,
    Four,
}

impl PeakKind {
    pub fn count(self) -> usize {
        match self {
            PeakKind::One => 1,
            PeakKind::Four => 4,
        }
    }
}

/// Templates for everything a session generates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Peak count and seed are overwritten per task.
    pub landscape: LandscapeConfig,
    /// Seed is overwritten per task.
    pub helper: HelperConfig,
    /// Dial position at the start of every task.
    pub initial_dial: DialSetting,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            landscape: LandscapeConfig::default(),
            helper: HelperConfig::default(),
            initial_dial: DialSetting::ORIGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub index: usize,
    pub phase: Phase,
    pub peaks: PeakKind,
    pub landscape: FramedLandscape,
    /// Displayed value of the best setting, shown only to anchored participants.
    pub anchor_value: Option<f64>,
    pub helper_seed: u64,
}

/// What the participant submitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DialInput {
    /// Both dials, solo tasks.
    Full(DialSetting),
    /// Left dial only, team tasks.
    Left(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// 1-based position in the task history.
    pub sequence: usize,
    pub human_dial: DialInput,
    pub helper_dial: Option<usize>,
    pub setting: DialSetting,
    pub raw_value: f64,
    pub displayed_value: f64,
    pub move_class: MoveClass,
    /// Milliseconds since session start.
    pub timestamp: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub final_setting: DialSetting,
    pub raw_score: f64,
    pub displayed_score: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TaskRecord {
    pub history: Vec<Evaluation>,
    pub result: Option<TaskResult>,
    pub helper: Option<HelperState>,
}

impl TaskRecord {
    pub fn settings(&self) -> Vec<DialSetting> {
        self.history.iter().map(|e| e.setting).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Active,
    BetweenTasks,
    Completed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub master_seed: u64,
    pub treatment_override: Option<Treatment>,
    pub config: SessionConfig,
    pub treatment: Treatment,
    pub tasks: Vec<TaskSpec>,
    pub records: Vec<TaskRecord>,
    pub current_task: usize,
    pub state: SessionState,
    pub events: Vec<EventRecord>,
    /// Unix milliseconds at creation.
    pub started_at: u64,
    /// Raw landscape lookups made on behalf of the participant or helper.
    pub landscape_queries: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the session-level generator.
fn session_seed(participant_id: &str, master_seed: u64) -> u64 {
    fnv1a(participant_id.as_bytes()) ^ master_seed.rotate_left(17)
}

pub fn session_id_for(participant_id: &str, master_seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(session_seed(participant_id, master_seed));
    rng.set_stream(1);
    format!("{:016x}", rng.gen::<u64>())
}

fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    /// Creates a session stamped with the current wall clock.
    pub fn create(
        participant_id: &str,
        master_seed: u64,
        treatment_override: Option<Treatment>,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        Self::create_at(participant_id, master_seed, treatment_override, config, now_unix_ms())
    }

    pub fn create_at(
        participant_id: &str,
        master_seed: u64,
        treatment_override: Option<Treatment>,
        config: SessionConfig,
        started_at: u64,
    ) -> Result<Self, SessionError> {
        let mut rng = ChaCha8Rng::seed_from_u64(session_seed(participant_id, master_seed));
        // Always drawn so that overriding the treatment leaves every other
        // draw untouched.
        let drawn = Treatment::ALL[rng.gen_range(0..Treatment::ALL.len())];
        let treatment = treatment_override.unwrap_or(drawn);

        let mut solo = [PeakKind::One, PeakKind::Four];
        let mut team = [PeakKind::One, PeakKind::Four];
        solo.shuffle(&mut rng);
        team.shuffle(&mut rng);
        let layout = [
            (Phase::Solo, solo[0]),
            (Phase::Solo, solo[1]),
            (Phase::Team, team[0]),
            (Phase::Team, team[1]),
        ];

        let torus = config.landscape.torus();
        if !torus.contains(config.initial_dial) {
            return Err(SessionError::OutOfBounds(config.initial_dial));
        }
        config.helper.check(torus.height)?;

        let mut tasks = Vec::with_capacity(TASK_COUNT);
        for (index, (phase, peaks)) in layout.into_iter().enumerate() {
            let landscape_seed: u64 = rng.gen();
            let helper_seed: u64 = rng.gen();
            let frame_seed: u64 = rng.gen();
            let lc = LandscapeConfig {
                peak_count: peaks.count(),
                seed: landscape_seed,
                ..config.landscape.clone()
            };
            let raw = landscape::generate(&lc)?;
            let framed = apply_frame(raw, treatment.frame, &mut ChaCha8Rng::seed_from_u64(frame_seed));
            let anchor_value = treatment.anchored.then(|| framed.best_displayed());
            tasks.push(TaskSpec {
                index,
                phase,
                peaks,
                landscape: framed,
                anchor_value,
                helper_seed,
            });
        }

        let session_id = session_id_for(participant_id, master_seed);
        let mut session = Session {
            session_id,
            participant_id: participant_id.to_string(),
            master_seed,
            treatment_override,
            config,
            treatment,
            tasks,
            records: vec![TaskRecord::default(); TASK_COUNT],
            current_task: 0,
            state: SessionState::Active,
            events: Vec::new(),
            started_at,
            landscape_queries: 0,
        };
        session.push(
            Event::SessionCreated {
                session_id: session.session_id.clone(),
                participant_id: session.participant_id.clone(),
                master_seed,
                treatment_override,
                config: session.config.clone(),
                treatment,
            },
            started_at,
        );
        session.start_task(0, 0)?;
        Ok(session)
    }

    fn push(&mut self, event: Event, wall_clock: u64) {
        let sequence = self.events.len() as u64;
        self.events.push(EventRecord {
            session_id: self.session_id.clone(),
            sequence,
            event,
            wall_clock: Some(wall_clock),
        });
    }

    fn start_task(&mut self, index: usize, elapsed: u64) -> Result<(), SessionError> {
        self.current_task = index;
        self.state = SessionState::Active;
        let task = &self.tasks[index];
        if task.phase == Phase::Team {
            let helper = HelperConfig {
                seed: task.helper_seed,
                ..self.config.helper.clone()
            };
            let height = task.landscape.landscape.config.height;
            self.records[index].helper =
                Some(HelperState::new(helper, height, self.config.initial_dial.y)?);
        }
        let event = Event::TaskStarted {
            task_index: index,
            phase: task.phase,
            peaks: task.peaks,
            frame: task.landscape.frame,
            offset: task.landscape.offset,
            anchor_value: task.anchor_value,
            landscape_seed: task.landscape.landscape.config.seed,
        };
        self.push(event, elapsed);
        Ok(())
    }

    pub fn current(&self) -> &TaskSpec {
        &self.tasks[self.current_task]
    }

    pub fn current_record(&self) -> &TaskRecord {
        &self.records[self.current_task]
    }

    pub fn elapsed_ms(&self) -> u64 {
        now_unix_ms().saturating_sub(self.started_at)
    }

    /// Submits dial settings, timestamped from the wall clock.
    pub fn evaluate(&mut self, input: DialInput) -> Result<Evaluation, SessionError> {
        let elapsed = self.elapsed_ms();
        self.evaluate_at(input, elapsed)
    }

    /// Submits dial settings at `elapsed` ms since session start. A session
    /// waiting between tasks starts the next task first.
    pub fn evaluate_at(&mut self, input: DialInput, elapsed: u64) -> Result<Evaluation, SessionError> {
        let next = match self.state {
            SessionState::Completed => return Err(SessionError::SessionNotActive),
            SessionState::BetweenTasks => self.current_task + 1,
            SessionState::Active => self.current_task,
        };
        let spec = &self.tasks[next];
        let torus = spec.landscape.landscape.torus();
        match (spec.phase, input) {
            (Phase::Solo, DialInput::Left(_)) => {
                return Err(SessionError::TaskIsSoloButSingleDialGiven(next))
            }
            (Phase::Team, DialInput::Full(_)) => {
                return Err(SessionError::TaskIsTeamButFullSettingGiven(next))
            }
            (_, DialInput::Full(s)) if !torus.contains(s) => return Err(SessionError::OutOfBounds(s)),
            (_, DialInput::Left(x)) if x >= torus.width => {
                return Err(SessionError::OutOfBounds(DialSetting::new(x, 0)))
            }
            _ => {}
        }
        if self.state == SessionState::BetweenTasks {
            self.start_task(next, elapsed)?;
        }

        let index = self.current_task;
        self.push(
            Event::HumanInput {
                task_index: index,
                input,
            },
            elapsed,
        );

        let (setting, helper_dial) = match input {
            DialInput::Full(s) => {
                self.landscape_queries += 1;
                (s, None)
            }
            DialInput::Left(x) => {
                let landscape = &self.tasks[index].landscape.landscape;
                let mut helper = self.records[index]
                    .helper
                    .take()
                    .expect("team tasks carry a helper");
                let mut queries = Vec::with_capacity(2);
                let turn = helper.turn(x, |s: DialSetting| -> Result<f64, SessionError> {
                    let v = landscape.elevation(s);
                    queries.push((s, v));
                    Ok(v)
                });
                self.records[index].helper = Some(helper);
                let turn = turn?;
                self.landscape_queries += queries.len() as u64;
                for (setting, raw_value) in queries {
                    self.push(
                        Event::HelperQuery {
                            task_index: index,
                            setting,
                            raw_value,
                        },
                        elapsed,
                    );
                }
                self.push(
                    Event::HelperChoice {
                        task_index: index,
                        turn,
                    },
                    elapsed,
                );
                (DialSetting::new(x, turn.chosen_dial), Some(turn.chosen_dial))
            }
        };

        let framed = &self.tasks[index].landscape;
        let raw_value = framed.raw(setting);
        let record = &self.records[index];
        let torus = framed.landscape.torus();
        let evaluation = Evaluation {
            sequence: record.history.len() + 1,
            human_dial: input,
            helper_dial,
            setting,
            raw_value,
            displayed_value: raw_value + framed.offset,
            move_class: classify(&record.settings(), setting, torus),
            timestamp: elapsed,
        };
        self.records[index].history.push(evaluation.clone());
        self.push(
            Event::Feedback {
                task_index: index,
                evaluation: evaluation.clone(),
            },
            elapsed,
        );
        Ok(evaluation)
    }

    pub fn finalize(&mut self) -> Result<TaskResult, SessionError> {
        let elapsed = self.elapsed_ms();
        self.finalize_at(elapsed)
    }

    /// Closes the current task on its most recent evaluation.
    pub fn finalize_at(&mut self, elapsed: u64) -> Result<TaskResult, SessionError> {
        match self.state {
            SessionState::Completed => return Err(SessionError::SessionNotActive),
            SessionState::BetweenTasks => {
                return Err(SessionError::NothingEvaluated(self.current_task + 1))
            }
            SessionState::Active => {}
        }
        let index = self.current_task;
        let last = self.records[index]
            .history
            .last()
            .ok_or(SessionError::NothingEvaluated(index))?;
        let result = TaskResult {
            final_setting: last.setting,
            raw_score: last.raw_value,
            displayed_score: last.displayed_value,
        };
        self.records[index].result = Some(result);
        self.push(
            Event::Finalized {
                task_index: index,
                result: Some(result),
            },
            elapsed,
        );
        if index + 1 == TASK_COUNT {
            self.state = SessionState::Completed;
            let bonus = self.bonus()?;
            self.push(Event::BonusComputed { bonus }, elapsed);
        } else {
            self.state = SessionState::BetweenTasks;
        }
        Ok(result)
    }

    /// Bonus in dollars: the mean over tasks of the final elevation's position
    /// between the landscape mean and the global peak, clamped to `[0, 1]`,
    /// times the maximum bonus, rounded to cents.
    pub fn bonus(&self) -> Result<f64, SessionError> {
        if self.state != SessionState::Completed {
            return Err(SessionError::SessionNotCompleted);
        }
        let mut total = 0.0;
        for (spec, record) in self.tasks.iter().zip(&self.records) {
            let result = record.result.ok_or(SessionError::SessionNotCompleted)?;
            total += normalized_score(&spec.landscape.landscape, result.raw_score);
        }
        Ok(round_cents(MAX_BONUS * total / TASK_COUNT as f64))
    }

    /// Rebuilds a session from its log by re-applying the input events.
    ///
    /// Recorded derived events are checked against the regenerated ones. A
    /// log holding only input events is accepted as is; a full log may lack
    /// derived events after its last record (an interrupted write).
    pub fn replay(records: &[EventRecord]) -> Result<Session, SessionError> {
        let first = records
            .first()
            .ok_or_else(|| SessionError::MalformedLog("empty log".into()))?;
        let mut session = match &first.event {
            Event::SessionCreated {
                participant_id,
                master_seed,
                treatment_override,
                config,
                ..
            } => Session::create_at(
                participant_id,
                *master_seed,
                *treatment_override,
                config.clone(),
                first.wall_clock.unwrap_or(0),
            )?,
            other => {
                return Err(SessionError::MalformedLog(format!(
                    "log starts with {} instead of SessionCreated",
                    other.kind()
                )))
            }
        };
        for r in &records[1..] {
            let elapsed = r.wall_clock.unwrap_or(0);
            match &r.event {
                Event::HumanInput { task_index, input } => {
                    session.expect_task(r, *task_index)?;
                    session.evaluate_at(*input, elapsed)?;
                }
                Event::Finalized { task_index, .. } => {
                    session.expect_task(r, *task_index)?;
                    session.finalize_at(elapsed)?;
                }
                Event::SessionCreated { .. } => {
                    return Err(SessionError::MalformedLog("repeated SessionCreated".into()))
                }
                _ => {}
            }
        }

        let full = records.iter().any(|r| !r.event.is_input());
        let regenerated: Vec<&EventRecord> = if full {
            session.events.iter().collect()
        } else {
            session.events.iter().filter(|r| r.event.is_input()).collect()
        };
        if regenerated.len() < records.len() {
            return Err(SessionError::MalformedLog("log has more events than its inputs produce".into()));
        }
        for (recorded, fresh) in records.iter().zip(regenerated) {
            let same = fresh.event.matches_recorded(&recorded.event)
                && recorded.session_id == fresh.session_id
                && (!full || recorded.sequence == fresh.sequence);
            if !same {
                return Err(SessionError::ReplayMismatch {
                    sequence: recorded.sequence,
                    detail: format!("recorded {:?}, regenerated {:?}", recorded.event, fresh.event),
                });
            }
        }
        Ok(session)
    }

    fn expect_task(&self, r: &EventRecord, task_index: usize) -> Result<(), SessionError> {
        let target = match self.state {
            SessionState::BetweenTasks => self.current_task + 1,
            _ => self.current_task,
        };
        if target != task_index {
            return Err(SessionError::ReplayMismatch {
                sequence: r.sequence,
                detail: format!("input for task {task_index} while task {target} is open"),
            });
        }
        Ok(())
    }
}

/// Where `raw` sits between the landscape mean (0) and its peak (1), clamped.
pub fn normalized_score(landscape: &landscape::Landscape, raw: f64) -> f64 {
    let mean = landscape.mean_elevation();
    ((raw - mean) / (landscape.max_elevation() - mean)).clamp(0.0, 1.0)
}

pub fn round_cents(amount: f64) -> f64 {
    (amount * 100.0).round() / 100.0
}
