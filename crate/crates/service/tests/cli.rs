use std::fs;
use std::process::{Command, Output};

use rsl_core::landscape::{self, LandscapeConfig};
use rsl_core::session::{session_id_for, Session, SessionConfig};

fn rsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsl")).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generated_landscapes_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l");
    let o = rsl(&["--seed", "10", "generate", "--peaks", "4", "--count", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let mut files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .collect();
    files.sort();
    assert_eq!(files.len(), 5);
    let mut args = vec!["validate"];
    args.extend(files.iter().map(String::as_str));
    let o = rsl(&args);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(text(&o).matches(": ok").count(), 5);

    let expected = landscape::generate(&LandscapeConfig::with_peaks(4, 12)).unwrap().to_text();
    assert_eq!(fs::read_to_string(out.join("landscape-4p-12.txt")).unwrap(), expected);
}

#[test]
fn broken_landscapes_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut l = landscape::generate(&LandscapeConfig::with_peaks(1, 3)).unwrap();
    let far = (l.global_peak.y * 24 + l.global_peak.x + 12 * 24) % 576;
    l.grid[far] = 31.5;
    let path = dir.path().join("bad.txt");
    fs::write(&path, l.to_text()).unwrap();
    let garbage = dir.path().join("garbage.txt");
    fs::write(&garbage, "not a landscape").unwrap();
    let o = rsl(&["validate", path.to_str().unwrap(), garbage.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report = text(&o);
    assert!(report.contains("bad.txt"), "{report}");
    assert!(report.contains("garbage.txt: unreadable"), "{report}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(rsl(&["simulate", "--cohort", "x"]).status.code(), Some(2));
    assert_eq!(rsl(&["generate", "--peaks", "2"]).status.code(), Some(2));
    assert_eq!(rsl(&["serve", "--delay-ms", "9"]).status.code(), Some(2));
    assert_eq!(rsl(&["generate", "--count", "3"]).status.code(), Some(2));
    assert_eq!(rsl(&[]).status.code(), Some(2));
}

#[test]
fn simulation_is_reproducible() {
    let a = rsl(&["simulate", "--cohort", "100", "--seed", "7"]);
    let b = rsl(&["simulate", "--cohort", "100", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(text(&a).lines().count(), 1 + 400);
    let c = rsl(&["simulate", "--cohort", "100", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn environment_overrides_flags() {
    let a = Command::new(env!("CARGO_BIN_EXE_rsl"))
        .args(["simulate", "--cohort", "4"])
        .env("RSL_SEED", "7")
        .env("RSL_ANCHOR", "on")
        .output()
        .unwrap();
    let b = rsl(&["simulate", "--cohort", "4", "--seed", "7", "--anchor", "on"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(text(&a).lines().skip(1).all(|l| l.contains(",on,")));
}

#[test]
fn metrics_from_simulated_logs_match_the_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = rsl(&["simulate", "--cohort", "8", "--seed", "3", "--policy", "satisficer", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let summary = dir.path().join("summary.csv");
    let o = rsl(&["metrics", out.join("logs").to_str().unwrap(), "--summary", summary.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(text(&o), fs::read_to_string(out.join("metrics.csv")).unwrap());
    assert_eq!(fs::read_to_string(&summary).unwrap().lines().count(), 1 + 4 * 3);
}

/// Session creation, one evaluation and a finalize, written out by hand.
#[test]
fn metrics_on_a_hand_written_log() {
    let participant = "hand";
    let seed = 5u64;
    let id = session_id_for(participant, seed);
    let log = format!(
        concat!(
            r#"{{"session_id":"{id}","sequence":0,"kind":"SessionCreated","payload":{{"session_id":"{id}","participant_id":"hand","master_seed":5,"treatment_override":{{"frame":"gain","anchored":false}},"config":{{}},"treatment":{{"frame":"gain","anchored":false}}}}}}"#,
            "\n",
            r#"{{"session_id":"{id}","sequence":2,"kind":"HumanInput","payload":{{"task_index":0,"input":{{"full":{{"x":3,"y":4}}}}}}}}"#,
            "\n",
            r#"{{"session_id":"{id}","sequence":4,"kind":"Finalized","payload":{{"task_index":0}}}}"#,
            "\n"
        ),
        id = id
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hand.ndjson");
    fs::write(&path, log).unwrap();
    let o = rsl(&["metrics", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = text(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 2);
    let cells: Vec<&str> = rows[1].split(',').collect();
    // One move: duration 1, and the first move always explores.
    assert_eq!(&cells[..4], &["hand", "gain", "off", "0"]);
    assert_eq!(&cells[6..9], &["1", "1", "1.0"]);

    // The score is the raw elevation at [D,E] of task 0's landscape.
    let s = Session::create_at(participant, seed, None, SessionConfig::default(), 0).unwrap();
    let l = landscape::generate(&LandscapeConfig::with_peaks(s.tasks[0].peaks.count(), s.tasks[0].landscape.landscape.config.seed)).unwrap();
    let raw = l.grid[4 * 24 + 3];
    assert_eq!(cells[9].parse::<f64>().unwrap(), raw);
    let mean = l.grid.iter().sum::<f64>() / 576.0;
    assert!((cells[10].parse::<f64>().unwrap() - raw / mean).abs() < 1e-12);
}

#[test]
fn layers_export_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(rsl(&["simulate", "--cohort", "1", "--seed", "2", "--out", out.to_str().unwrap()]).status.success());
    let log = out.join("logs").join("p00000.ndjson");
    let a = rsl(&["export-layers", log.to_str().unwrap(), "--task", "2"]);
    let b = rsl(&["export-layers", log.to_str().unwrap(), "--task", "2"]);
    assert!(a.status.success(), "{a:?}");
    assert_eq!(a.stdout, b.stdout);
    let grid: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(grid["shape"], serde_json::json!([4, 24, 24]));
    assert_eq!(rsl(&["export-layers", log.to_str().unwrap(), "--task", "9"]).status.code(), Some(1));
}
