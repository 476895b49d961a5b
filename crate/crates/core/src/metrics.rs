//! Behavioural metrics extracted from task histories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::grid::{DialSetting, Torus};
use crate::landscape::{Frame, Landscape};
use crate::session::{Phase, Session, TaskRecord, Treatment};
use crate::stats;

/// A setting at least this far (toroidal L1) from every earlier one explores.
pub const EXPLORE_DISTANCE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveClass {
    Explore,
    Exploit,
}

/// Classifies `next` against the settings observed before it in the task.
pub fn classify(history: &[DialSetting], next: DialSetting, torus: Torus) -> MoveClass {
    if history.iter().all(|&prior| torus.l1(prior, next) >= EXPLORE_DISTANCE) {
        MoveClass::Explore
    } else {
        MoveClass::Exploit
    }
}

/// Labels for a full task history, each move against its prefix.
pub fn classify_history(settings: &[DialSetting], torus: Torus) -> Vec<MoveClass> {
    (0..settings.len())
        .map(|i| classify(&settings[..i], settings[i], torus))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    /// Number of submitted settings.
    pub search_duration: usize,
    pub explore_count: usize,
    pub explore_fraction: f64,
    pub raw_score: f64,
    /// Raw score over the landscape's mean elevation.
    pub adjusted_score: f64,
}

pub fn task_metrics(
    task_index: usize,
    record: &TaskRecord,
    landscape: &Landscape,
) -> Result<TaskMetrics, MetricsError> {
    let result = record
        .result
        .ok_or(MetricsError::TaskNotFinalized(task_index))?;
    let labels = classify_history(&record.settings(), landscape.torus());
    if let Some(i) = labels
        .iter()
        .zip(&record.history)
        .position(|(l, e)| *l != e.move_class)
    {
        return Err(MetricsError::LabelMismatch {
            task_index,
            sequence: i + 1,
        });
    }
    let duration = labels.len();
    let explores = labels.iter().filter(|&&c| c == MoveClass::Explore).count();
    Ok(TaskMetrics {
        search_duration: duration,
        explore_count: explores,
        explore_fraction: explores as f64 / duration as f64,
        raw_score: result.raw_score,
        adjusted_score: result.raw_score / landscape.mean_elevation(),
    })
}

/// One line of the tabular export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub participant: String,
    pub treatment_frame: Frame,
    pub treatment_anchor: Anchor,
    pub task_index: usize,
    pub phase: Phase,
    pub peaks: usize,
    pub duration: usize,
    pub explores: usize,
    pub explore_fraction: f64,
    pub raw_score: f64,
    pub adjusted_score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    On,
    Off,
}

impl From<bool> for Anchor {
    fn from(anchored: bool) -> Self {
        if anchored {
            Anchor::On
        } else {
            Anchor::Off
        }
    }
}

pub const TABLE_HEADER: &str = "participant,treatment_frame,treatment_anchor,task_index,phase,peaks,duration,explores,explore_fraction,raw_score,adjusted_score";

/// Rows for every finalized task of a session.
pub fn session_rows(session: &Session) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut rows = Vec::new();
    for (spec, record) in session.tasks.iter().zip(&session.records) {
        if record.result.is_none() {
            continue;
        }
        let m = task_metrics(spec.index, record, &spec.landscape.landscape)?;
        rows.push(MetricsRow {
            participant: session.participant_id.clone(),
            treatment_frame: session.treatment.frame,
            treatment_anchor: session.treatment.anchored.into(),
            task_index: spec.index,
            phase: spec.phase,
            peaks: spec.peaks.count(),
            duration: m.search_duration,
            explores: m.explore_count,
            explore_fraction: m.explore_fraction,
            raw_score: m.raw_score,
            adjusted_score: m.adjusted_score,
        });
    }
    Ok(rows)
}

/// Comma-separated table with [`TABLE_HEADER`].
pub fn write_table(rows: &[MetricsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        let header: Vec<&str> = TABLE_HEADER.split(',').collect();
        w.write_record(header).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn read_table(text: &str) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

/// Solo and team totals for one participant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMetrics {
    pub participant: String,
    pub treatment: Treatment,
    pub solo_adjusted: f64,
    pub team_adjusted: f64,
    pub solo_duration: f64,
    pub team_duration: f64,
    pub solo_explore: f64,
    pub team_explore: f64,
}

impl ParticipantMetrics {
    /// Sums adjusted scores and durations per phase and averages explore
    /// fractions. Expects the rows of one completed session.
    pub fn from_rows(rows: &[MetricsRow]) -> Result<Self, MetricsError> {
        let first = rows
            .first()
            .ok_or_else(|| MetricsError::InsufficientData("no rows".into()))?;
        let phase = |p: Phase| rows.iter().filter(move |r| r.phase == p);
        for p in [Phase::Solo, Phase::Team] {
            if phase(p).count() == 0 {
                return Err(MetricsError::InsufficientData(format!(
                    "participant {} has no {p:?} tasks",
                    first.participant
                )));
            }
        }
        let sum = |p: Phase, f: fn(&MetricsRow) -> f64| phase(p).map(f).sum::<f64>();
        let avg = |p: Phase, f: fn(&MetricsRow) -> f64| sum(p, f) / phase(p).count() as f64;
        Ok(Self {
            participant: first.participant.clone(),
            treatment: Treatment {
                frame: first.treatment_frame,
                anchored: first.treatment_anchor == Anchor::On,
            },
            solo_adjusted: sum(Phase::Solo, |r| r.adjusted_score),
            team_adjusted: sum(Phase::Team, |r| r.adjusted_score),
            solo_duration: sum(Phase::Solo, |r| r.duration as f64),
            team_duration: sum(Phase::Team, |r| r.duration as f64),
            solo_explore: avg(Phase::Solo, |r| r.explore_fraction),
            team_explore: avg(Phase::Team, |r| r.explore_fraction),
        })
    }

    pub fn measure(&self, m: Measure) -> (f64, f64) {
        match m {
            Measure::AdjustedScore => (self.solo_adjusted, self.team_adjusted),
            Measure::Duration => (self.solo_duration, self.team_duration),
            Measure::ExploreFraction => (self.solo_explore, self.team_explore),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    AdjustedScore,
    Duration,
    ExploreFraction,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::AdjustedScore, Measure::Duration, Measure::ExploreFraction];
}

/// Solo-versus-team contrast for one treatment group and measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub treatment: Treatment,
    pub measure: Measure,
    pub n: usize,
    pub solo_mean: f64,
    pub solo_sd: f64,
    pub team_mean: f64,
    pub team_sd: f64,
    /// Mean of `team - solo`.
    pub mean_difference: f64,
    pub ci95: (f64, f64),
}

fn group_key(t: Treatment) -> (u8, bool) {
    (matches!(t.frame, Frame::Loss) as u8, t.anchored)
}

/// Per-treatment summaries of the solo/team contrast for every measure.
pub fn cohort_summary(cohort: &[ParticipantMetrics]) -> Result<Vec<GroupSummary>, MetricsError> {
    let mut groups: BTreeMap<(u8, bool), Vec<&ParticipantMetrics>> = BTreeMap::new();
    for p in cohort {
        groups.entry(group_key(p.treatment)).or_default().push(p);
    }
    if groups.is_empty() {
        return Err(MetricsError::InsufficientData("empty cohort".into()));
    }
    let mut out = Vec::new();
    for members in groups.values() {
        let treatment = members[0].treatment;
        if members.len() < 2 {
            return Err(MetricsError::InsufficientData(format!(
                "treatment {treatment:?} has {} participant(s)",
                members.len()
            )));
        }
        for measure in Measure::ALL {
            let (solo, team): (Vec<f64>, Vec<f64>) = members.iter().map(|p| p.measure(measure)).unzip();
            let diff: Vec<f64> = team.iter().zip(&solo).map(|(t, s)| t - s).collect();
            let n = diff.len() as f64;
            let md = stats::mean(&diff);
            let half = stats::t_quantile(0.975, n - 1.0) * stats::std_dev(&diff) / n.sqrt();
            out.push(GroupSummary {
                treatment,
                measure,
                n: members.len(),
                solo_mean: stats::mean(&solo),
                solo_sd: stats::std_dev(&solo),
                team_mean: stats::mean(&team),
                team_sd: stats::std_dev(&team),
                mean_difference: md,
                ci95: (md - half, md + half),
            });
        }
    }
    Ok(out)
}
