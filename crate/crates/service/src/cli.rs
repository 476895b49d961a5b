//! The `rsl` operator command line.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rsl_core::export::export_layers;
use rsl_core::landscape::{self, Frame, Landscape};
use rsl_core::metrics::{cohort_summary, session_rows, write_table, GroupSummary, ParticipantMetrics};
use rsl_core::session::{Session, SessionConfig, SessionState, Treatment};
use rsl_core::synth::{run_cohort, CohortCell, CohortSpec, Policy};

use crate::server::{serve, ServerConfig, DEFAULT_DELAY_MS};
use crate::store::{read_log, write_file};

#[derive(Debug, Parser)]
#[command(name = "rsl", version, about = "Rugged-landscape search experiments")]
pub struct Cli {
    /// Session configuration file (JSON); omitted fields take defaults.
    #[arg(long, global = true, env = "RSL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "RSL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write generated landscapes as text files.
    Generate {
        #[arg(long, env = "RSL_PEAKS", default_value = "1", value_parser = ["1", "4"])]
        peaks: String,
        /// Number of landscapes, seeded `seed`, `seed + 1`, ...
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Output file, or directory when `count` > 1. Stdout if omitted.
        #[arg(long, env = "RSL_OUT")]
        out: Option<PathBuf>,
    },
    /// Check landscape files against the generator's constraints.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run a synthetic cohort and write its metrics table.
    Simulate {
        /// Total participants, spread evenly over the selected treatments.
        #[arg(long)]
        cohort: usize,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Restrict to one frame.
        #[arg(long, env = "RSL_FRAME")]
        frame: Option<FrameArg>,
        /// Restrict to anchored or unanchored participants.
        #[arg(long, env = "RSL_ANCHOR")]
        anchor: Option<Switch>,
        /// Directory for `metrics.csv` and per-session logs. Table to stdout if omitted.
        #[arg(long, env = "RSL_OUT")]
        out: Option<PathBuf>,
    },
    /// Metrics table from event logs (files or directories of `.ndjson`).
    Metrics {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, env = "RSL_OUT")]
        out: Option<PathBuf>,
        /// Also write per-treatment solo/team summaries here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run the session service.
    Serve {
        #[arg(long, env = "RSL_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory holding the session logs.
        #[arg(long, env = "RSL_OUT", default_value = "sessions")]
        out: PathBuf,
        /// Helper delay bounds in milliseconds.
        #[arg(long, env = "RSL_DELAY_MS", default_value = "600:1200")]
        delay_ms: DelayRange,
        #[arg(long, env = "RSL_NO_DELAY")]
        no_delay: bool,
    },
    /// Layered-grid export of one finalized task of a logged session.
    ExportLayers {
        log: PathBuf,
        #[arg(long)]
        task: usize,
        #[arg(long, env = "RSL_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Gain,
    Loss,
}

impl From<FrameArg> for Frame {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::Gain => Frame::Gain,
            FrameArg::Loss => Frame::Loss,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyName {
    Random,
    Greedy,
    Satisficer,
}

#[derive(Clone, Copy, Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, default_value = "greedy")]
    pub policy: PolicyName,
    /// Moves per task for the random explorer.
    #[arg(long, default_value_t = 20)]
    pub max_moves: usize,
    /// Non-improving moves a greedy climber tolerates.
    #[arg(long, default_value_t = 6)]
    pub patience: usize,
    /// Satisficer's good-enough fraction.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    /// Satisficer's random exploration moves.
    #[arg(long, default_value_t = 8)]
    pub budget: usize,
}

impl PolicyArgs {
    pub fn policy(&self) -> Policy {
        match self.policy {
            PolicyName::Random => Policy::random_explorer(self.max_moves, 0),
            PolicyName::Greedy => Policy::greedy_climber(self.patience, 0),
            PolicyName::Satisficer => Policy::effort_satisficer(self.threshold, self.budget, 0),
        }
    }
}

/// `lo:hi` in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DelayRange(pub u64, pub u64);

impl FromStr for DelayRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
        let lo: u64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
        let hi: u64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
        if lo > hi {
            return Err("lower bound exceeds upper bound".into());
        }
        Ok(DelayRange(lo, hi))
    }
}

impl Default for DelayRange {
    fn default() -> Self {
        DelayRange(DEFAULT_DELAY_MS.0, DEFAULT_DELAY_MS.1)
    }
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn fail(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: message.to_string(),
    }
}

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.to_string(),
    }
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("rsl: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SessionConfig, Failure> {
    let Some(path) = path else {
        return Ok(SessionConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| fail(format!("{}: {e}", parent.display())))?;
            }
            fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| fail(format!("stdout: {e}"))),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { peaks, count, out } => generate(&config, cli.seed, &peaks, count, out.as_deref()),
        Command::Validate { files } => validate(&files),
        Command::Simulate {
            cohort,
            policy,
            frame,
            anchor,
            out,
        } => simulate(config, cli.seed, cohort, policy, frame, anchor, out.as_deref()),
        Command::Metrics { logs, out, summary } => metrics(&logs, out.as_deref(), summary.as_deref()),
        Command::Serve {
            bind,
            out,
            delay_ms,
            no_delay,
        } => {
            let server = ServerConfig {
                store_dir: out,
                master_seed: cli.seed,
                session: config,
                delay_ms: (!no_delay).then_some((delay_ms.0, delay_ms.1)),
            };
            let runtime = tokio::runtime::Runtime::new().map_err(fail)?;
            runtime.block_on(serve(server, bind)).map_err(fail)
        }
        Command::ExportLayers { log, task, out } => {
            let records = read_log(&log).map_err(fail)?;
            let session = Session::replay(&records).map_err(fail)?;
            let grid = export_layers(&session, task).map_err(fail)?;
            let mut text = grid.to_text();
            text.push('\n');
            write_output(out.as_deref(), &text)
        }
    }
}

fn generate(config: &SessionConfig, seed: u64, peaks: &str, count: u64, out: Option<&Path>) -> Result<(), Failure> {
    let peak_count: usize = peaks.parse().map_err(usage)?;
    if count > 1 && out.is_none() {
        return Err(usage("--out DIR is required when --count exceeds 1"));
    }
    for i in 0..count {
        let lc = rsl_core::landscape::LandscapeConfig {
            peak_count,
            seed: seed.wrapping_add(i),
            ..config.landscape.clone()
        };
        let l = landscape::generate(&lc).map_err(fail)?;
        let text = l.to_text();
        match out {
            Some(dir) if count > 1 => {
                fs::create_dir_all(dir).map_err(|e| fail(format!("{}: {e}", dir.display())))?;
                let path = dir.join(format!("landscape-{peak_count}p-{}.txt", lc.seed));
                write_output(Some(&path), &text)?;
            }
            _ => write_output(out, &text)?,
        }
    }
    Ok(())
}

fn validate(files: &[PathBuf]) -> Result<(), Failure> {
    let mut bad = 0;
    for path in files {
        let parsed = fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|t| Landscape::from_text(&t).map_err(|e| e.to_string()));
        match parsed {
            Err(e) => {
                bad += 1;
                println!("{}: unreadable: {e}", path.display());
            }
            Ok(l) => {
                let violations = landscape::validate(&l);
                if violations.is_empty() {
                    println!("{}: ok", path.display());
                } else {
                    bad += 1;
                    for v in violations {
                        println!("{}: {v}", path.display());
                    }
                }
            }
        }
    }
    if bad > 0 {
        return Err(fail(format!("{bad} of {} landscape(s) failed validation", files.len())));
    }
    Ok(())
}

fn simulate(
    session: SessionConfig,
    seed: u64,
    cohort: usize,
    policy: PolicyArgs,
    frame: Option<FrameArg>,
    anchor: Option<Switch>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let treatments: Vec<Treatment> = Treatment::ALL
        .into_iter()
        .filter(|t| frame.is_none_or(|f| t.frame == f.into()))
        .filter(|t| anchor.is_none_or(|a| t.anchored == (a == Switch::On)))
        .collect();
    let policy = policy.policy();
    policy.check().map_err(usage)?;
    let n = treatments.len();
    let cells = treatments
        .iter()
        .enumerate()
        .map(|(i, &treatment)| CohortCell {
            policy,
            treatment,
            count: cohort / n + usize::from(i < cohort % n),
        })
        .collect();
    let spec = CohortSpec { cells, session };
    let data = run_cohort(&spec, seed).map_err(fail)?;
    let table = write_table(&data.rows);
    match out {
        None => write_output(None, &table),
        Some(dir) => {
            let logs = dir.join("logs");
            fs::create_dir_all(&logs).map_err(|e| fail(format!("{}: {e}", logs.display())))?;
            for s in &data.sessions {
                write_file(&logs.join(format!("{}.ndjson", s.participant_id)), &s.events).map_err(fail)?;
            }
            write_output(Some(&dir.join("metrics.csv")), &table)
        }
    }
}

fn log_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| fail(format!("{}: {e}", input.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "ndjson"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn metrics(logs: &[PathBuf], out: Option<&Path>, summary: Option<&Path>) -> Result<(), Failure> {
    let mut rows = Vec::new();
    let mut participants = Vec::new();
    for path in log_files(logs)? {
        let records = read_log(&path).map_err(fail)?;
        let session = Session::replay(&records).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        let session_rows = session_rows(&session).map_err(fail)?;
        if session.state == SessionState::Completed {
            participants.push(ParticipantMetrics::from_rows(&session_rows).map_err(fail)?);
        }
        rows.extend(session_rows);
    }
    write_output(out, &write_table(&rows))?;
    if let Some(path) = summary {
        let groups = cohort_summary(&participants).map_err(fail)?;
        write_output(Some(path), &summary_table(&groups))?;
    }
    Ok(())
}

fn summary_table(groups: &[GroupSummary]) -> String {
    let mut out = String::from(
        "treatment_frame,treatment_anchor,measure,n,solo_mean,solo_sd,team_mean,team_sd,mean_difference,ci_low,ci_high\n",
    );
    for g in groups {
        out.push_str(&format!(
            "{},{},{:?},{},{},{},{},{},{},{},{}\n",
            g.treatment.frame,
            if g.treatment.anchored { "on" } else { "off" },
            g.measure,
            g.n,
            g.solo_mean,
            g.solo_sd,
            g.team_mean,
            g.team_sd,
            g.mean_difference,
            g.ci95.0,
            g.ci95.1
        ));
    }
    out
}
