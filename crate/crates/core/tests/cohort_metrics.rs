//! Metrics recomputed from the raw event logs without going through the
//! metrics module.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsl_core::events::Event;
use rsl_core::metrics::{
    classify_history, cohort_summary, read_table, write_table, Measure, MoveClass, ParticipantMetrics,
};
use rsl_core::session::Phase;
use rsl_core::synth::{run_cohort, CohortSpec, Policy};
use rsl_core::{DialSetting, Torus};

fn wrap_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Every move is compared against every earlier move, written out longhand.
fn brute_force_labels(moves: &[(usize, usize)]) -> Vec<bool> {
    let mut out = Vec::new();
    for i in 0..moves.len() {
        let mut nearest = usize::MAX;
        for j in 0..i {
            let d = wrap_distance(moves[i].0, moves[j].0, 24) + wrap_distance(moves[i].1, moves[j].1, 24);
            nearest = nearest.min(d);
        }
        out.push(nearest >= 3);
    }
    out
}

#[test]
fn classification_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let torus = Torus::new(24, 24);
    for _ in 0..2_000 {
        let moves: Vec<(usize, usize)> = (0..30).map(|_| (rng.gen_range(0..24), rng.gen_range(0..24))).collect();
        let settings: Vec<DialSetting> = moves.iter().map(|&(x, y)| DialSetting::new(x, y)).collect();
        let ours: Vec<bool> = classify_history(&settings, torus)
            .into_iter()
            .map(|c| c == MoveClass::Explore)
            .collect();
        assert_eq!(ours, brute_force_labels(&moves));
    }
}

#[test]
fn cohort_rows_match_a_recomputation_from_the_logs() {
    let spec = CohortSpec::balanced(Policy::effort_satisficer(0.9, 6, 1), 3);
    let data = run_cohort(&spec, 77).unwrap();
    assert_eq!(data.rows.len(), 12 * 4);
    let mut k = 0;
    for s in &data.sessions {
        for task in 0..4 {
            let mut moves = Vec::new();
            let mut last = None;
            for r in &s.events {
                match &r.event {
                    Event::Feedback { task_index, evaluation } if *task_index == task => {
                        moves.push((evaluation.setting.x, evaluation.setting.y));
                        last = Some(evaluation.raw_value);
                    }
                    Event::Finalized { task_index, result } if *task_index == task => {
                        assert_eq!(result.unwrap().raw_score, last.unwrap());
                    }
                    _ => {}
                }
            }
            let grid = &s.tasks[task].landscape.landscape.grid;
            let mean = grid.iter().sum::<f64>() / grid.len() as f64;
            let explores = brute_force_labels(&moves).iter().filter(|&&e| e).count();
            let row = &data.rows[k];
            k += 1;
            assert_eq!((row.participant.as_str(), row.task_index), (s.participant_id.as_str(), task));
            assert_eq!(row.duration, moves.len());
            assert_eq!(row.explores, explores);
            assert!((row.explore_fraction - explores as f64 / moves.len() as f64).abs() < 1e-12);
            assert!((row.adjusted_score - last.unwrap() / mean).abs() < 1e-9);
        }
    }

    let text = write_table(&data.rows);
    assert_eq!(read_table(&text).unwrap(), data.rows);

    let participants: Vec<ParticipantMetrics> = data
        .rows
        .chunks(4)
        .map(|c| ParticipantMetrics::from_rows(c).unwrap())
        .collect();
    for (p, rows) in participants.iter().zip(data.rows.chunks(4)) {
        let solo: f64 = rows.iter().filter(|r| r.phase == Phase::Solo).map(|r| r.duration as f64).sum();
        assert_eq!(p.solo_duration, solo);
    }
    let summary = cohort_summary(&participants).unwrap();
    assert_eq!(summary.len(), 4 * Measure::ALL.len());
    for g in &summary {
        let diffs: Vec<f64> = participants
            .iter()
            .filter(|p| p.treatment == g.treatment)
            .map(|p| {
                let (solo, team) = p.measure(g.measure);
                team - solo
            })
            .collect();
        assert_eq!(g.n, diffs.len());
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        assert!((g.mean_difference - m).abs() < 1e-9);
        assert!(g.ci95.0 <= m && m <= g.ci95.1);
    }
}
