//! Run-time configurations and the small-step reduction relation.
//!
//! A [`Config`] is a canonical multiset: every component is keyed by its
//! name in an ordered map, so structurally congruent configurations are
//! equal values. Local steps (`let` of a value, `if`) are applied eagerly
//! after every scheduled step; only memory, channel, spawn, lock and select
//! steps are offered to the [`Scheduler`].

mod scheduler;
mod step;
mod trace;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{Detector, LabelSource, RaceReport};
use crate::names::{ChanId, Name, Pid};
use crate::syntax::{Program, Term, Value};

pub use scheduler::{
    ChoiceScheduler, PrefixScheduler, RandomScheduler, RuleScript, ScheduleError, Scheduler, ScriptedScheduler,
};
pub use trace::{Event, Op};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Thread<K> {
    pub term: Term,
    pub knowledge: K,
    /// Per-thread counters for fresh labels, channels and children.
    pub next_label: u32,
    pub next_chan: u32,
    pub spawned: u32,
}

impl<K> Thread<K> {
    fn new(term: Term, knowledge: K) -> Self {
        Thread {
            term,
            knowledge,
            next_label: 0,
            next_chan: 0,
            spawned: 0,
        }
    }
}

/// A bounded channel as a pair of queues.
///
/// `forward` holds messages oldest first; `backward` holds one ticket per
/// free slot. The end-of-transmission marker is kept apart in `eot`: it sits
/// logically behind every message and is never dequeued.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Channel<K> {
    pub capacity: u32,
    pub forward: VecDeque<(Value, K)>,
    pub backward: VecDeque<K>,
    pub eot: Option<K>,
    pub sent: u32,
    pub received: u32,
}

impl<K: Clone> Channel<K> {
    fn new(capacity: u32, dummy: K) -> Self {
        Channel {
            capacity,
            forward: VecDeque::new(),
            backward: std::iter::repeat_n(dummy, capacity as usize).collect(),
            eot: None,
            sent: 0,
            received: 0,
        }
    }
}

impl<K> Channel<K> {
    pub fn is_closed(&self) -> bool {
        self.eot.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Lock<K> {
    Released(K),
    Acquired,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config<K, R> {
    pub threads: BTreeMap<Pid, Thread<K>>,
    pub memory: BTreeMap<Name, Value>,
    pub records: BTreeMap<Name, R>,
    pub channels: BTreeMap<ChanId, Channel<K>>,
    pub locks: BTreeMap<Name, Lock<K>>,
}

pub type ConfigOf<D> = Config<<D as Detector>::Knowledge, <D as Detector>::Record>;

impl<K, R> Config<K, R> {
    pub fn all_stopped(&self) -> bool {
        self.threads.values().all(|t| t.term.is_stop())
    }
}

/// Reduction rule chosen by a [`StepChoice`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Rule {
    Read,
    Write,
    Make,
    Go,
    Close,
    Acquire,
    Release,
    Send,
    Recv,
    RecvEot,
    Rendezvous,
    Default,
    /// An ill-typed head term (non-boolean condition, non-channel operand).
    Fault,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Partner {
    pub pid: Pid,
    pub branch: Option<usize>,
}

/// A scheduler decision: which thread fires which rule, and for selects,
/// which branch. Choices mention no detector state and no fresh names other
/// than pids, so the same choice is meaningful under every detector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepChoice {
    pub pid: Pid,
    pub rule: Rule,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub branch: Option<usize>,
    /// Receiver of a rendezvous.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partner: Option<Partner>,
}

impl fmt::Display for StepChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.pid, self.rule)?;
        if let Some(b) = self.branch {
            write!(f, "[{b}]")?;
        }
        if let Some(p) = &self.partner {
            write!(f, " with {}", p.pid)?;
            if let Some(b) = p.branch {
                write!(f, "[{b}]")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PanicReason {
    #[error("send on closed channel {0}")]
    SendOnClosed(ChanId),
    #[error("close of closed channel {0}")]
    CloseOfClosed(ChanId),
    #[error("condition `{0}` is not a boolean")]
    NotBoolean(Value),
    #[error("`{0}` is not a channel")]
    NotChannel(Value),
}

/// Why a step did not produce a successor configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stop {
    Race { report: RaceReport, attempt: Event },
    Panic { pid: Pid, reason: PanicReason },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Outcome {
    Terminated,
    Race(RaceReport),
    Panic { pid: Pid, reason: PanicReason },
    Deadlock,
    StepBudgetExceeded,
}

impl Outcome {
    pub fn race(&self) -> Option<&RaceReport> {
        match self {
            Outcome::Race(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult<K, R> {
    pub outcome: Outcome,
    pub trace: Vec<Event>,
    pub choices: Vec<StepChoice>,
    /// Scheduler indices; replaying them reproduces this run.
    pub indices: Vec<usize>,
    pub config: Config<K, R>,
}

pub type RunResultOf<D> = RunResult<<D as Detector>::Knowledge, <D as Detector>::Record>;

/// What a buffered send deposits next to its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SendKnowledge {
    /// The sender's knowledge before it joins the consumed slot ticket.
    #[default]
    PreUnion,
    /// The sender's knowledge after joining the ticket.
    PostUnion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub send_knowledge: SendKnowledge,
    pub max_steps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            send_knowledge: SendKnowledge::PreUnion,
            max_steps: 10_000,
        }
    }
}

/// The interpreter, parameterized by a detector.
#[derive(Clone, Debug)]
pub struct Runtime<D> {
    pub detector: D,
    pub options: RunOptions,
}

impl<D: Detector> Runtime<D> {
    pub fn new(detector: D) -> Self {
        Runtime {
            detector,
            options: RunOptions::default(),
        }
    }

    pub fn with_options(detector: D, options: RunOptions) -> Self {
        Runtime { detector, options }
    }

    /// One root thread whose knowledge holds the initial write of every
    /// variable; locks released with empty knowledge; no channels.
    pub fn initial_config(&self, program: &Program) -> ConfigOf<D> {
        let root = Pid::root();
        let names: Vec<Name> = program.vars.iter().map(|(z, _)| z.clone()).collect();
        let mut next_label = 0;
        let (knowledge, records) = self.detector.initial(
            &names,
            &mut LabelSource {
                pid: &root,
                next: &mut next_label,
            },
        );
        let mut thread = Thread::new(program.main.clone(), knowledge);
        thread.next_label = next_label;
        let mut config = Config {
            threads: BTreeMap::new(),
            memory: program.vars.iter().cloned().collect(),
            records: names.into_iter().zip(records).collect(),
            channels: BTreeMap::new(),
            locks: program
                .locks
                .iter()
                .map(|l| (l.clone(), Lock::Released(self.detector.empty())))
                .collect(),
        };
        config.threads.insert(root.clone(), thread);
        // Local steps before the first scheduled step belong to no one.
        let _ = self.normalize(&mut config, &root);
        config
    }

    /// Runs until termination, a stop, deadlock or the step budget.
    pub fn run(&self, program: &Program, scheduler: &mut dyn Scheduler) -> Result<RunResultOf<D>, ScheduleError> {
        self.run_observed(program, scheduler, &mut |_, _| {})
    }

    /// As [`Runtime::run`], calling `observe(step, config)` on the initial
    /// configuration (step 0) and after every successful step.
    pub fn run_observed(
        &self,
        program: &Program,
        scheduler: &mut dyn Scheduler,
        observe: &mut dyn FnMut(usize, &ConfigOf<D>),
    ) -> Result<RunResultOf<D>, ScheduleError> {
        let mut config = self.initial_config(program);
        let mut trace = Vec::new();
        let mut choices = Vec::new();
        let mut indices = Vec::new();
        observe(0, &config);
        let outcome = loop {
            let enabled = self.enabled_steps(&config);
            if enabled.is_empty() {
                break if config.all_stopped() {
                    Outcome::Terminated
                } else {
                    Outcome::Deadlock
                };
            }
            let step = choices.len();
            if step >= self.options.max_steps {
                break Outcome::StepBudgetExceeded;
            }
            let index = scheduler.choose(step, &enabled)?;
            let choice = enabled[index].clone();
            indices.push(index);
            choices.push(choice.clone());
            match self.advance(&mut config, &choice, step) {
                Ok(events) => {
                    trace.extend(events);
                    observe(step + 1, &config);
                }
                Err(Stop::Race { report, attempt }) => {
                    trace.push(attempt);
                    break Outcome::Race(report);
                }
                Err(Stop::Panic { pid, reason }) => break Outcome::Panic { pid, reason },
            }
        };
        Ok(RunResult {
            outcome,
            trace,
            choices,
            indices,
            config,
        })
    }

    /// Replays scheduler indices, as recorded in [`RunResult::indices`].
    pub fn replay(&self, program: &Program, indices: &[usize]) -> Result<RunResultOf<D>, ScheduleError> {
        self.run(program, &mut ScriptedScheduler::new(indices.to_vec()))
    }

    /// Scheduled step number `step` (zero-based): applies `choice`, stamps
    /// the events, and runs periodic garbage collection if configured.
    pub fn advance(&self, config: &mut ConfigOf<D>, choice: &StepChoice, step: usize) -> Result<Vec<Event>, Stop> {
        match self.step(config, choice) {
            Ok(events) => {
                self.periodic_gc(config, step + 1);
                Ok(events.into_iter().map(|(pid, op)| Event { step, pid, op }).collect())
            }
            Err(Stop::Race { report, mut attempt }) => {
                attempt.step = step;
                Err(Stop::Race { report, attempt })
            }
            Err(stop) => Err(stop),
        }
    }

    fn periodic_gc(&self, config: &mut ConfigOf<D>, steps_done: usize) {
        if let Some(n) = self.detector.gc_every() {
            if steps_done.is_multiple_of(n as usize) {
                let pids: Vec<Pid> = config.threads.keys().cloned().collect();
                for pid in pids {
                    self.collect(config, &pid);
                }
            }
        }
    }

    /// Offline garbage collection of one thread's knowledge.
    pub fn collect(&self, config: &mut ConfigOf<D>, pid: &Pid) {
        if let Some(t) = config.threads.get_mut(pid) {
            self.detector.collect(&mut t.knowledge, &config.records);
        }
    }
}

#[cfg(test)]
mod tests;
