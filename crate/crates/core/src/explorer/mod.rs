//! Exhaustive schedule exploration, the trace happens-before oracle, the
//! manifest-witness search and differential detector runs.

pub mod diff;
pub mod manifest;
pub mod oracle;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::detector::{Detector, RaceKind};
use crate::names::Name;
use crate::runtime::{Event, Outcome, RunResult, RunResultOf, Runtime, StepChoice, Stop};
use crate::syntax::{Program, Value};

pub use diff::{compare_exhaustive, compare_run, verdict_of, verdict_on, Diff, DiffReport, End, Verdict};
pub use manifest::{commutation_class, find_manifest, independent, ManifestResult, ManifestWitness};
pub use oracle::{build_hb_order, classify_races, HbOrder, OracleError, RacePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    /// Stop after this many maximal schedules and mark the summary truncated.
    pub max_schedules: u64,
    /// Skip configurations already expanded elsewhere in the tree. Off by
    /// default: pruning merges schedules and so changes every count.
    pub prune_duplicates: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            max_schedules: 1_000_000,
            prune_duplicates: false,
        }
    }
}

/// Flagged schedules per first-race kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByKind {
    #[serde(rename = "RaW")]
    pub raw: u64,
    #[serde(rename = "WaW")]
    pub waw: u64,
    #[serde(rename = "WaR")]
    pub war: u64,
}

impl ByKind {
    pub fn get(&self, kind: RaceKind) -> u64 {
        match kind {
            RaceKind::RaW => self.raw,
            RaceKind::WaW => self.waw,
            RaceKind::WaR => self.war,
        }
    }

    fn bump(&mut self, kind: RaceKind) {
        match kind {
            RaceKind::RaW => self.raw += 1,
            RaceKind::WaW => self.waw += 1,
            RaceKind::WaR => self.war += 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub schedules: u64,
    pub flagged: u64,
    pub by_kind: ByKind,
    /// Distinct final memories of the schedules that terminated.
    pub finals: BTreeSet<BTreeMap<Name, Value>>,
    pub truncated: bool,
    pub panics: u64,
    pub deadlocks: u64,
    pub budget_exceeded: u64,
}

impl Summary {
    pub fn record<K, R>(&mut self, result: &RunResult<K, R>) {
        self.schedules += 1;
        match &result.outcome {
            Outcome::Terminated => {
                self.finals.insert(result.config.memory.clone());
            }
            Outcome::Race(report) => {
                self.flagged += 1;
                self.by_kind.bump(report.kind);
            }
            Outcome::Panic { .. } => self.panics += 1,
            Outcome::Deadlock => self.deadlocks += 1,
            Outcome::StepBudgetExceeded => self.budget_exceeded += 1,
        }
    }

    /// Combines summaries of disjoint schedule sets. Associative and
    /// commutative, so partial explorations can be merged in any order.
    pub fn merge(mut self, other: Summary) -> Summary {
        self.schedules += other.schedules;
        self.flagged += other.flagged;
        self.by_kind.raw += other.by_kind.raw;
        self.by_kind.waw += other.by_kind.waw;
        self.by_kind.war += other.by_kind.war;
        self.finals.extend(other.finals);
        self.truncated |= other.truncated;
        self.panics += other.panics;
        self.deadlocks += other.deadlocks;
        self.budget_exceeded += other.budget_exceeded;
        self
    }

    pub fn any_race(&self) -> bool {
        self.flagged > 0
    }

    pub fn all_race(&self) -> bool {
        self.schedules > 0 && self.flagged == self.schedules
    }

    /// Values the variable `var` holds across terminated schedules.
    pub fn final_values(&self, var: &str) -> BTreeSet<Value> {
        self.finals.iter().filter_map(|m| m.get(var).cloned()).collect()
    }
}

struct Frame<C> {
    config: C,
    enabled: Vec<StepChoice>,
    next: usize,
    /// Trace length on reaching this configuration.
    trace_len: usize,
}

/// Runs every maximal schedule of `program` depth first, calling `visit` on
/// each one. Schedules end at termination, deadlock, a race, a panic or the
/// runtime's step budget.
pub fn explore<D: Detector>(
    rt: &Runtime<D>,
    program: &Program,
    options: ExploreOptions,
    visit: &mut dyn FnMut(&RunResultOf<D>),
) -> Summary {
    let mut summary = Summary::default();
    let mut seen = HashSet::new();
    let initial = rt.initial_config(program);
    let mut stack = vec![Frame {
        enabled: rt.enabled_steps(&initial),
        config: initial,
        next: 0,
        trace_len: 0,
    }];
    let mut trace: Vec<Event> = Vec::new();
    let mut choices: Vec<StepChoice> = Vec::new();
    let mut indices: Vec<usize> = Vec::new();

    let mut emit = |summary: &mut Summary, result: RunResultOf<D>| {
        summary.record(&result);
        visit(&result);
    };

    while !stack.is_empty() {
        let depth = stack.len() - 1;
        let top = &mut stack[depth];
        trace.truncate(top.trace_len);
        choices.truncate(depth);
        indices.truncate(depth);

        if top.enabled.is_empty() || depth >= rt.options.max_steps {
            let outcome = if !top.enabled.is_empty() {
                Outcome::StepBudgetExceeded
            } else if top.config.all_stopped() {
                Outcome::Terminated
            } else {
                Outcome::Deadlock
            };
            let frame = stack.pop().expect("non-empty stack");
            emit(
                &mut summary,
                RunResult {
                    outcome,
                    trace: trace.clone(),
                    choices: choices.clone(),
                    indices: indices.clone(),
                    config: frame.config,
                },
            );
        } else if top.next >= top.enabled.len() {
            stack.pop();
            continue;
        } else {
            let index = top.next;
            top.next += 1;
            let choice = top.enabled[index].clone();
            let mut config = top.config.clone();
            choices.push(choice.clone());
            indices.push(index);
            match rt.advance(&mut config, &choice, depth) {
                Ok(events) => {
                    if options.prune_duplicates && !seen.insert(fingerprint(&config)) {
                        continue;
                    }
                    trace.extend(events);
                    stack.push(Frame {
                        enabled: rt.enabled_steps(&config),
                        config,
                        next: 0,
                        trace_len: trace.len(),
                    });
                    continue;
                }
                Err(stop) => {
                    let mut full = trace.clone();
                    let outcome = match stop {
                        Stop::Race { report, attempt } => {
                            full.push(attempt);
                            Outcome::Race(report)
                        }
                        Stop::Panic { pid, reason } => Outcome::Panic { pid, reason },
                    };
                    emit(
                        &mut summary,
                        RunResult {
                            outcome,
                            trace: full,
                            choices: choices.clone(),
                            indices: indices.clone(),
                            config,
                        },
                    );
                }
            }
        }
        if summary.schedules >= options.max_schedules {
            summary.truncated = stack.iter().any(|f| f.next < f.enabled.len());
            break;
        }
    }
    summary
}

fn fingerprint<K: Hash, R: Hash>(config: &crate::runtime::Config<K, R>) -> u64 {
    let mut h = DefaultHasher::new();
    config.hash(&mut h);
    h.finish()
}

/// Explores without a visitor.
pub fn summarize<D: Detector>(rt: &Runtime<D>, program: &Program, options: ExploreOptions) -> Summary {
    explore(rt, program, options, &mut |_| {})
}

#[cfg(test)]
mod tests;
