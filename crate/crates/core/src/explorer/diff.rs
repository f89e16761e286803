//! Running two detectors on identical choice sequences.
//!
//! Schedules are enumerated under the first detector and replayed by value
//! under the second. Comparing in one direction is enough: a verdict names
//! the step at which a race stopped the run, so if the second detector flags
//! a schedule the first runs past, the replay of the longer schedule flags at
//! a step the first did not.

use serde::Serialize;

use super::{explore, ExploreOptions};
use crate::detector::{Detector, RaceKind};
use crate::names::Name;
use crate::runtime::{Outcome, RunResult, Runtime, ScheduleError, Scheduler, StepChoice, Stop};
use crate::syntax::Program;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum End {
    Terminated,
    Deadlock,
    Panic,
    Budget,
    /// The choices ran out while steps were still enabled.
    Running,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "camelCase")]
pub enum Verdict {
    Race {
        step: usize,
        kind: RaceKind,
        var: Name,
    },
    Clean {
        end: End,
    },
    /// Choice `step` was not enabled under this detector.
    Diverged {
        step: usize,
    },
}

impl Verdict {
    pub fn is_race(&self) -> bool {
        matches!(self, Verdict::Race { .. })
    }
}

pub fn verdict_of<K, R>(result: &RunResult<K, R>) -> Verdict {
    match &result.outcome {
        Outcome::Race(report) => Verdict::Race {
            step: result.choices.len() - 1,
            kind: report.kind,
            var: report.var.clone(),
        },
        Outcome::Terminated => Verdict::Clean { end: End::Terminated },
        Outcome::Deadlock => Verdict::Clean { end: End::Deadlock },
        Outcome::Panic { .. } => Verdict::Clean { end: End::Panic },
        Outcome::StepBudgetExceeded => Verdict::Clean { end: End::Budget },
    }
}

/// Verdict of `rt` on exactly the steps in `choices`.
pub fn verdict_on<D: Detector>(rt: &Runtime<D>, program: &Program, choices: &[StepChoice]) -> Verdict {
    let mut config = rt.initial_config(program);
    for (step, choice) in choices.iter().enumerate() {
        if !rt.enabled_steps(&config).contains(choice) {
            return Verdict::Diverged { step };
        }
        match rt.advance(&mut config, choice, step) {
            Ok(_) => {}
            Err(Stop::Race { report, .. }) => {
                return Verdict::Race {
                    step,
                    kind: report.kind,
                    var: report.var,
                }
            }
            Err(Stop::Panic { .. }) => return Verdict::Clean { end: End::Panic },
        }
    }
    let end = if !rt.enabled_steps(&config).is_empty() {
        if choices.len() >= rt.options.max_steps {
            End::Budget
        } else {
            End::Running
        }
    } else if config.all_stopped() {
        End::Terminated
    } else {
        End::Deadlock
    };
    Verdict::Clean { end }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diff {
    /// Scheduler indices under the first detector.
    pub indices: Vec<usize>,
    pub a: Verdict,
    pub b: Verdict,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffReport {
    pub a: String,
    pub b: String,
    pub schedules: u64,
    pub flagged: u64,
    pub diffs: Vec<Diff>,
    pub truncated: bool,
}

impl DiffReport {
    fn new(a: &str, b: &str) -> Self {
        DiffReport {
            a: a.to_string(),
            b: b.to_string(),
            ..DiffReport::default()
        }
    }

    fn check<K, R, B: Detector>(&mut self, result: &RunResult<K, R>, rb: &Runtime<B>, program: &Program) {
        let a = verdict_of(result);
        let b = verdict_on(rb, program, &result.choices);
        self.schedules += 1;
        self.flagged += a.is_race() as u64;
        if a != b {
            self.diffs.push(Diff {
                indices: result.indices.clone(),
                a,
                b,
            });
        }
    }
}

/// Every schedule of `program` under `ra`, replayed under `rb`.
pub fn compare_exhaustive<A: Detector, B: Detector>(
    ra: &Runtime<A>,
    rb: &Runtime<B>,
    program: &Program,
    options: ExploreOptions,
) -> DiffReport {
    let mut report = DiffReport::new(ra.detector.name(), rb.detector.name());
    let summary = explore(ra, program, options, &mut |r| report.check(r, rb, program));
    report.truncated = summary.truncated;
    report
}

/// One schedule chosen by `scheduler` under `ra`, replayed under `rb`.
pub fn compare_run<A: Detector, B: Detector>(
    ra: &Runtime<A>,
    rb: &Runtime<B>,
    program: &Program,
    scheduler: &mut dyn Scheduler,
) -> Result<DiffReport, ScheduleError> {
    let mut report = DiffReport::new(ra.detector.name(), rb.detector.name());
    let result = ra.run(program, scheduler)?;
    report.check(&result, rb, program);
    Ok(report)
}
