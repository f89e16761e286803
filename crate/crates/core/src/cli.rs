//! The `hbrace` command line: `run`, `explore` and `compare`.
//!
//! Exit codes: 0 when every run was clean, 1 when a race was found (or, for
//! `compare`, when verdicts differ), 2 when a run panicked, deadlocked or ran
//! out of steps without a race, and 3 for usage, input and script errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::detector::{DetectorKind, DetectorOptions, GcMode};
use crate::explorer::{
    build_hb_order, classify_races, compare_exhaustive, compare_run, explore, find_manifest, ExploreOptions,
    ManifestResult, Summary,
};
use crate::report::{run_with_report, ResultKind};
use crate::runtime::{
    Outcome, RandomScheduler, RunOptions, Runtime, ScheduleError, Scheduler, ScriptedScheduler, SendKnowledge,
};
use crate::syntax::{parse, ParseError, Program};
use crate::with_detector;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_RACE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Script { path: PathBuf, source: ScheduleError },
    #[error("schedule does not replay: {0}")]
    Replay(#[from] ScheduleError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "hbrace",
    version,
    about = "Run .mini programs under happens-before race detectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one schedule (or all of them) and report the verdict.
    Run(RunArgs),
    /// Enumerate every schedule and summarize the verdicts.
    Explore(ExploreArgs),
    /// Run two detectors on identical schedules and list verdict differences.
    Compare(CompareArgs),
}

/// How schedules are picked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScheduleSpec {
    Random,
    Exhaustive,
    /// Replay a file of step indices; the path may also come from `--script`.
    Scripted(Option<PathBuf>),
}

impl FromStr for ScheduleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(ScheduleSpec::Random),
            "exhaustive" => Ok(ScheduleSpec::Exhaustive),
            "scripted" => Ok(ScheduleSpec::Scripted(None)),
            _ => match s.strip_prefix("scripted:") {
                Some(path) if !path.is_empty() => Ok(ScheduleSpec::Scripted(Some(path.into()))),
                _ => Err(format!(
                    "unknown schedule `{s}` (expected random, exhaustive, scripted or scripted:PATH)"
                )),
            },
        }
    }
}

fn send_knowledge(s: &str) -> Result<SendKnowledge, String> {
    match s {
        "pre-union" => Ok(SendKnowledge::PreUnion),
        "post-union" => Ok(SendKnowledge::PostUnion),
        _ => Err(format!(
            "unknown send knowledge `{s}` (expected pre-union or post-union)"
        )),
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Program source (`.mini`).
    pub program: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_schedules: u64,
    /// Offline collection for the gc detector: off, eager or every-N.
    #[arg(long, default_value = "eager")]
    pub gc_mode: GcMode,
    /// Remember at most this many reads per variable (hb-set detectors).
    #[arg(long)]
    pub max_reads: Option<usize>,
    /// Knowledge deposited with a buffered message: pre-union or post-union.
    #[arg(long, default_value = "pre-union", value_parser = send_knowledge)]
    pub send_knowledge: SendKnowledge,
    /// Output file; defaults to standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Directory for output files when `--out` is not given.
    #[arg(long, env = "HBRACE_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// random (needs --seed), exhaustive, or scripted (needs a script path).
    #[arg(long, default_value = "random")]
    pub schedule: ScheduleSpec,
    /// Step-index file for the scripted schedule.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// aw, war, gc, vc-djit or vc-fasttrack.
    #[arg(long, default_value = "war")]
    pub detector: DetectorKind,
    /// Save the chosen step indices for later `--schedule scripted` replay.
    #[arg(long)]
    pub write_script: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "war")]
    pub detector: DetectorKind,
    /// Skip configurations already expanded (changes the counts).
    #[arg(long)]
    pub prune: bool,
    /// Search each flagged schedule's commutation class for a manifest race.
    #[arg(long)]
    pub manifest: bool,
    #[arg(long, default_value_t = 100_000)]
    pub manifest_cap: usize,
    /// Check every verdict against the trace happens-before oracle.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "exhaustive")]
    pub schedule: ScheduleSpec,
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub a: DetectorKind,
    #[arg(long)]
    pub b: DetectorKind,
}

impl Common {
    fn detector_options(&self) -> DetectorOptions {
        DetectorOptions {
            gc: self.gc_mode,
            max_reads: self.max_reads,
        }
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            send_knowledge: self.send_knowledge,
            max_steps: self.max_steps,
        }
    }

    fn explore_options(&self) -> ExploreOptions {
        ExploreOptions {
            max_schedules: self.max_schedules,
            ..ExploreOptions::default()
        }
    }

    fn load(&self) -> Result<Program, CliError> {
        let text = read(&self.program)?;
        parse(&text).map_err(|source| CliError::Parse {
            path: self.program.clone(),
            source,
        })
    }

    /// `--out`, else `<out-dir>/<stem>.<suffix>.json`, else `None` (stdout).
    fn destination(&self, suffix: &str) -> Option<PathBuf> {
        self.out.clone().or_else(|| {
            let stem = self.program.file_stem().map(|s| s.to_string_lossy().into_owned())?;
            self.out_dir.as_ref().map(|d| d.join(format!("{stem}.{suffix}.json")))
        })
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Where a picked schedule comes from, resolved and validated.
enum Picked {
    Random(u64),
    Scripted(ScriptedScheduler),
    Exhaustive,
}

impl Picked {
    fn resolve(spec: &ScheduleSpec, script: &Option<PathBuf>, seed: Option<u64>) -> Result<Picked, CliError> {
        match spec {
            ScheduleSpec::Exhaustive => Ok(Picked::Exhaustive),
            ScheduleSpec::Random => seed
                .map(Picked::Random)
                .ok_or_else(|| CliError::Usage("--schedule random needs --seed".into())),
            ScheduleSpec::Scripted(path) => {
                let path = path
                    .clone()
                    .or_else(|| script.clone())
                    .ok_or_else(|| CliError::Usage("--schedule scripted needs a script path".into()))?;
                let sched =
                    ScriptedScheduler::parse(&read(&path)?).map_err(|source| CliError::Script { path, source })?;
                Ok(Picked::Scripted(sched))
            }
        }
    }

    fn scheduler(self) -> Box<dyn Scheduler> {
        match self {
            Picked::Random(seed) => Box::new(RandomScheduler::new(seed)),
            Picked::Scripted(s) => Box::new(s),
            Picked::Exhaustive => unreachable!("exhaustive runs have no single scheduler"),
        }
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn emit(&mut self, dest: Option<PathBuf>, text: &str) -> Result<(), CliError> {
        match dest {
            Some(path) => {
                write_file(&path, text)?;
                let _ = writeln!(self.err, "wrote {}", path.display());
                Ok(())
            }
            None => {
                let _ = self.out.write_all(text.as_bytes());
                Ok(())
            }
        }
    }

    fn note(&mut self, line: impl std::fmt::Display) {
        let _ = writeln!(self.err, "{line}");
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut io = Io { out, err };
    let result = match &cli.command {
        Command::Run(args) => run(args, &mut io),
        Command::Explore(args) => explore_cmd(args, &mut io),
        Command::Compare(args) => compare(args, &mut io),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            io.note(format_args!("error: {e}"));
            EXIT_USAGE
        }
    }
}

fn run(args: &RunArgs, io: &mut Io) -> Result<i32, CliError> {
    let program = args.common.load()?;
    let picked = Picked::resolve(&args.schedule.schedule, &args.schedule.script, args.schedule.seed)?;
    let opts = args.common.detector_options();
    let run_opts = args.common.run_options();
    if let Picked::Exhaustive = picked {
        let summary = with_detector!(args.detector, opts, |d| {
            explore(
                &Runtime::with_options(d, run_opts),
                &program,
                args.common.explore_options(),
                &mut |_| {},
            )
        });
        return finish_summary(&args.common, &ExploreOutput::plain(summary), io);
    }
    let mut scheduler = picked.scheduler();
    let (indices, report) = with_detector!(args.detector, opts, |d| {
        let rt = Runtime::with_options(d, run_opts);
        let (result, report) = run_with_report(&rt, &program, scheduler.as_mut())?;
        if let Outcome::Race(r) = &result.outcome {
            io.note(format_args!(
                "race: {} on {} by {} at step {}",
                r.kind,
                r.var,
                r.pid,
                result.choices.len() - 1
            ));
        }
        (result.indices, report)
    });
    io.emit(args.common.destination(args.detector.name()), &report.to_json())?;
    if let Some(path) = &args.write_script {
        write_file(path, &ScriptedScheduler::render(&indices))?;
    }
    io.note(format_args!(
        "result: {}",
        serde_json::to_value(report.result)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    ));
    Ok(match report.result {
        ResultKind::Ok => EXIT_CLEAN,
        ResultKind::Race => EXIT_RACE,
        ResultKind::Panic | ResultKind::Deadlock | ResultKind::Budget => EXIT_FAILURE,
    })
}

/// Counts of manifest-witness searches over flagged schedules.
#[derive(Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestCounts {
    pub found: u64,
    pub none: u64,
    pub inconclusive: u64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExploreOutput {
    #[serde(flatten)]
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestCounts>,
    /// Schedules on which the detector and the oracle disagree.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_mismatches: Option<u64>,
}

impl ExploreOutput {
    fn plain(summary: Summary) -> Self {
        ExploreOutput {
            summary,
            manifest: None,
            oracle_mismatches: None,
        }
    }
}

fn explore_cmd(args: &ExploreArgs, io: &mut Io) -> Result<i32, CliError> {
    let program = args.common.load()?;
    let options = ExploreOptions {
        prune_duplicates: args.prune,
        ..args.common.explore_options()
    };
    let mut manifest = args.manifest.then(ManifestCounts::default);
    let mut mismatches = args.oracle.then_some(0u64);
    let summary = with_detector!(args.detector, args.common.detector_options(), |d| {
        let rt = Runtime::with_options(d, args.common.run_options());
        explore(&rt, &program, options, &mut |r| {
            if let (Some(m), Outcome::Race(_)) = (manifest.as_mut(), &r.outcome) {
                match find_manifest(&program, &r.choices, args.manifest_cap) {
                    ManifestResult::Found(_) => m.found += 1,
                    ManifestResult::None { .. } => m.none += 1,
                    ManifestResult::Inconclusive { .. } => m.inconclusive += 1,
                }
            }
            if let Some(n) = mismatches.as_mut() {
                if !oracle_agrees(r.outcome.race().is_some(), &r.trace) {
                    *n += 1;
                }
            }
        })
    });
    finish_summary(
        &args.common,
        &ExploreOutput {
            summary,
            manifest,
            oracle_mismatches: mismatches,
        },
        io,
    )
}

/// A flagged trace must end in the later access of an unordered pair; a
/// clean one must have none.
fn oracle_agrees(flagged: bool, trace: &[crate::runtime::Event]) -> bool {
    let Ok(order) = build_hb_order(trace) else {
        return false;
    };
    let races = classify_races(&order);
    if flagged {
        races.iter().any(|p| p.later + 1 == trace.len())
    } else {
        races.is_empty()
    }
}

fn finish_summary(common: &Common, output: &ExploreOutput, io: &mut Io) -> Result<i32, CliError> {
    let text = serde_json::to_string_pretty(output).expect("summaries serialize") + "\n";
    io.emit(common.destination("explore"), &text)?;
    let s = &output.summary;
    io.note(format_args!(
        "{} schedule(s), {} flagged{}",
        s.schedules,
        s.flagged,
        if s.truncated { " (truncated)" } else { "" }
    ));
    Ok(if s.flagged > 0 {
        EXIT_RACE
    } else if s.panics + s.deadlocks + s.budget_exceeded > 0 {
        EXIT_FAILURE
    } else {
        EXIT_CLEAN
    })
}

fn compare(args: &CompareArgs, io: &mut Io) -> Result<i32, CliError> {
    let program = args.common.load()?;
    let picked = Picked::resolve(&args.schedule, &args.script, args.seed)?;
    let opts = args.common.detector_options();
    let run_opts = args.common.run_options();
    let explore_opts = args.common.explore_options();
    let mut scheduler = match picked {
        Picked::Exhaustive => None,
        other => Some(other.scheduler()),
    };
    let report = with_detector!(args.a, opts, |da| {
        with_detector!(args.b, opts, |db| {
            let (ra, rb) = (Runtime::with_options(da, run_opts), Runtime::with_options(db, run_opts));
            match scheduler.as_mut() {
                None => compare_exhaustive(&ra, &rb, &program, explore_opts),
                Some(s) => compare_run(&ra, &rb, &program, s.as_mut())?,
            }
        })
    });
    let text = serde_json::to_string_pretty(&report).expect("diff reports serialize") + "\n";
    io.emit(args.common.destination("compare"), &text)?;
    io.note(format_args!(
        "{} vs {}: {} schedule(s), {} verdict difference(s)",
        report.a,
        report.b,
        report.schedules,
        report.diffs.len()
    ));
    Ok(if report.diffs.is_empty() { EXIT_CLEAN } else { EXIT_RACE })
}
