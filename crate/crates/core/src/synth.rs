//! Scripted participants that play whole sessions.
//!
//! Policies see only what a participant sees: the phase of the current task,
//! the anchor message when one is shown, and the feedback returned by each
//! evaluation. They act only through evaluate and finalize.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, SessionError};
use crate::grid::{DialSetting, Torus};
use crate::metrics::{session_rows, MetricsRow};
use crate::session::{DialInput, Evaluation, Phase, Session, SessionConfig, SessionState, Treatment, TASK_COUNT};

/// Simulated time between participant actions.
pub const THINK_TIME_MS: u64 = 1_500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Uniformly random settings for `max_moves`, then finalize.
    RandomExplorer,
    /// Hill-climbs over toroidal neighbours; stops after `patience`
    /// non-improving evaluations or at a strict local maximum.
    GreedyClimber,
    /// Explores randomly for `patience` moves, then climbs and stops once a
    /// value is good enough relative to the anchor or its own best.
    EffortSatisficer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    /// Fraction of the reference value that counts as good enough.
    pub stop_threshold: f64,
    pub max_moves: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Policy {
    pub fn random_explorer(max_moves: usize, seed: u64) -> Self {
        Self {
            kind: PolicyKind::RandomExplorer,
            stop_threshold: 1.0,
            max_moves,
            patience: 0,
            seed,
        }
    }

    pub fn greedy_climber(patience: usize, seed: u64) -> Self {
        Self {
            kind: PolicyKind::GreedyClimber,
            stop_threshold: 1.0,
            max_moves: 200,
            patience,
            seed,
        }
    }

    pub fn effort_satisficer(stop_threshold: f64, exploration_budget: usize, seed: u64) -> Self {
        Self {
            kind: PolicyKind::EffortSatisficer,
            stop_threshold,
            max_moves: 120,
            patience: exploration_budget,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.max_moves < 1 {
            return Err("max_moves must be at least 1".into());
        }
        if !(self.stop_threshold > 0.0 && self.stop_threshold <= 1.0) {
            return Err("stop_threshold must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// The participant-facing surface of a session.
pub struct ParticipantView<'a> {
    session: &'a mut Session,
    clock: u64,
}

impl<'a> ParticipantView<'a> {
    pub fn new(session: &'a mut Session) -> Self {
        let clock = session.events.last().and_then(|r| r.wall_clock).unwrap_or(0);
        Self { session, clock }
    }

    /// Index of the task the next evaluation goes to.
    pub fn task_index(&self) -> usize {
        match self.session.state {
            SessionState::BetweenTasks => self.session.current_task + 1,
            _ => self.session.current_task,
        }
    }

    pub fn is_completed(&self) -> bool {
        self.session.state == SessionState::Completed
    }

    pub fn phase(&self) -> Phase {
        self.session.tasks[self.task_index()].phase
    }

    /// The anchor message, when the treatment shows one.
    pub fn anchor(&self) -> Option<f64> {
        self.session.tasks[self.task_index()].anchor_value
    }

    /// Dial sizes, as printed on the interface.
    pub fn dials(&self) -> Torus {
        self.session.config.landscape.torus()
    }

    pub fn evaluate(&mut self, input: DialInput) -> Result<Evaluation, SessionError> {
        self.clock += THINK_TIME_MS;
        self.session.evaluate_at(input, self.clock)
    }

    pub fn finalize(&mut self) -> Result<(), SessionError> {
        self.clock += THINK_TIME_MS;
        self.session.finalize_at(self.clock).map(|_| ())
    }
}

/// Settings the participant can move to from `from`: the four neighbours in
/// solo tasks, the two left-dial neighbours in team tasks.
fn neighbours(phase: Phase, dials: Torus, from: DialSetting) -> Vec<DialInput> {
    match phase {
        Phase::Solo => dials.neighbors4(from).into_iter().map(DialInput::Full).collect(),
        Phase::Team => [1isize, -1]
            .into_iter()
            .map(|d| DialInput::Left(Torus::wrap(from.x, d, dials.width)))
            .collect(),
    }
}

fn random_input(phase: Phase, dials: Torus, rng: &mut ChaCha8Rng) -> DialInput {
    let x = rng.gen_range(0..dials.width);
    match phase {
        Phase::Solo => DialInput::Full(DialSetting::new(x, rng.gen_range(0..dials.height))),
        Phase::Team => DialInput::Left(x),
    }
}

fn start_input(phase: Phase, start: DialSetting) -> DialInput {
    match phase {
        Phase::Solo => DialInput::Full(start),
        Phase::Team => DialInput::Left(start.x),
    }
}

/// Input that re-submits `setting` as closely as the phase allows.
fn resubmit(phase: Phase, setting: DialSetting) -> DialInput {
    start_input(phase, setting)
}

fn target(reference: f64, threshold: f64) -> f64 {
    reference - (1.0 - threshold) * reference.abs()
}

fn play_random(p: &Policy, view: &mut ParticipantView, rng: &mut ChaCha8Rng) -> Result<(), SessionError> {
    let (phase, dials) = (view.phase(), view.dials());
    for _ in 0..p.max_moves {
        view.evaluate(random_input(phase, dials, rng))?;
    }
    view.finalize()
}

fn play_greedy(
    p: &Policy,
    view: &mut ParticipantView,
    rng: &mut ChaCha8Rng,
    start: DialSetting,
) -> Result<(), SessionError> {
    let (phase, dials) = (view.phase(), view.dials());
    let first = view.evaluate(start_input(phase, start))?;
    let mut best = (first.setting, first.displayed_value);
    let mut last = first.setting;
    let mut moves = 1;
    let mut non_improving = 0;
    let mut untried = neighbours(phase, dials, best.0);
    untried.shuffle(rng);
    let mut saw_tie = false;

    // Keep one move in reserve to re-submit the best setting.
    while moves + 1 < p.max_moves && non_improving < p.patience {
        let (input, jump) = match untried.pop() {
            Some(i) => (i, false),
            None if saw_tie || phase == Phase::Team => (random_input(phase, dials, rng), true),
            None => break,
        };
        let e = view.evaluate(input)?;
        moves += 1;
        last = e.setting;
        if e.displayed_value > best.1 {
            best = (e.setting, e.displayed_value);
            non_improving = 0;
            saw_tie = false;
            untried = neighbours(phase, dials, best.0);
            untried.shuffle(rng);
        } else {
            saw_tie |= !jump && e.displayed_value == best.1;
            // Plateau escapes are free in solo tasks.
            if !(jump && phase == Phase::Solo) {
                non_improving += 1;
            }
        }
    }
    if last != best.0 && moves < p.max_moves {
        view.evaluate(resubmit(phase, best.0))?;
    }
    view.finalize()
}

fn play_satisficer(
    p: &Policy,
    view: &mut ParticipantView,
    rng: &mut ChaCha8Rng,
) -> Result<(), SessionError> {
    let (phase, dials) = (view.phase(), view.dials());
    let anchor = view.anchor();
    let budget = p.patience.max(1);
    let mut best: Option<(DialSetting, f64)> = None;
    let mut reference = None;
    let mut untried = Vec::new();

    for moves in 1..=p.max_moves {
        let input = if moves <= budget {
            random_input(phase, dials, rng)
        } else {
            untried.pop().unwrap_or_else(|| random_input(phase, dials, rng))
        };
        let e = view.evaluate(input)?;
        if best.is_none_or(|(_, v)| e.displayed_value > v) {
            best = Some((e.setting, e.displayed_value));
            untried = neighbours(phase, dials, e.setting);
            untried.shuffle(rng);
        }
        if moves == budget {
            reference = best.map(|(_, v)| v);
        }
        let v = e.displayed_value;
        let own_stop = reference.is_some_and(|r| v >= target(r, p.stop_threshold));
        let anchor_stop = anchor.is_some_and(|a| v >= target(a, p.stop_threshold));
        if own_stop || anchor_stop {
            break;
        }
    }
    view.finalize()
}

/// Plays every remaining task of `session` to completion.
pub fn run_policy(policy: &Policy, session: &mut Session) -> Result<(), SessionError> {
    policy.check().map_err(SessionError::InvalidPolicy)?;
    let start = session.config.initial_dial;
    let mut view = ParticipantView::new(session);
    while !view.is_completed() {
        let task = view.task_index();
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        rng.set_stream(task as u64);
        match policy.kind {
            PolicyKind::RandomExplorer => play_random(policy, &mut view, &mut rng)?,
            PolicyKind::GreedyClimber => play_greedy(policy, &mut view, &mut rng, start)?,
            PolicyKind::EffortSatisficer => play_satisficer(policy, &mut view, &mut rng)?,
        }
    }
    Ok(())
}

/// How many participants of each policy to run in a treatment cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortCell {
    pub policy: Policy,
    pub treatment: Treatment,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub cells: Vec<CohortCell>,
    #[serde(default)]
    pub session: SessionConfig,
}

impl CohortSpec {
    /// `per_cell` participants of `policy` in each of the four treatments.
    pub fn balanced(policy: Policy, per_cell: usize) -> Self {
        Self {
            cells: Treatment::ALL
                .iter()
                .map(|&treatment| CohortCell {
                    policy,
                    treatment,
                    count: per_cell,
                })
                .collect(),
            session: SessionConfig::default(),
        }
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CohortDataset {
    pub sessions: Vec<Session>,
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, thiserror::Error)]
pub enum CohortError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Participant `i`'s master seed under a cohort seed.
pub fn participant_seed(master_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_word_pos(2 * index as u128);
    rng.gen()
}

pub fn participant_id(index: usize) -> String {
    format!("p{index:05}")
}

/// Runs a whole cohort. Sessions run in parallel; output order follows the
/// spec's cells.
pub fn run_cohort(spec: &CohortSpec, master_seed: u64) -> Result<CohortDataset, CohortError> {
    let plan: Vec<(usize, Policy, Treatment)> = spec
        .cells
        .iter()
        .flat_map(|c| std::iter::repeat_n((c.policy, c.treatment), c.count))
        .enumerate()
        .map(|(i, (p, t))| (i, p, t))
        .collect();
    let sessions = plan
        .par_iter()
        .map(|&(i, policy, treatment)| {
            let seed = participant_seed(master_seed, i);
            let mut session =
                Session::create_at(&participant_id(i), seed, Some(treatment), spec.session.clone(), 0)?;
            run_policy(&policy.with_seed(policy.seed ^ seed), &mut session)?;
            Ok(session)
        })
        .collect::<Result<Vec<_>, SessionError>>()?;
    let mut rows = Vec::with_capacity(sessions.len() * TASK_COUNT);
    for s in &sessions {
        rows.extend(session_rows(s)?);
    }
    Ok(CohortDataset { sessions, rows })
}
