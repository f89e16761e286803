//! Race reports, metadata footprint statistics and their JSON form.
//!
//! Labels are renamed canonically before they are written out: the initial
//! writes become `m0..m{n-1}` in declaration order and every later label
//! takes the next number in the order the trace issues it. Replaying the
//! same choices therefore produces byte-identical documents.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::detector::{AccessKind, Conflict, Detector, RaceKind};
use crate::names::{ChanId, Label, Name, Pid};
use crate::runtime::{ConfigOf, Event, Lock, Op, Outcome, RunResultOf, Runtime, ScheduleError, Scheduler};
use crate::syntax::Program;

/// Entry counts of every piece of detector metadata in one configuration:
/// access labels for happens-before sets, non-zero entries for clocks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FootprintSample {
    pub step: usize,
    pub per_thread: BTreeMap<Pid, usize>,
    pub per_variable: BTreeMap<Name, usize>,
    pub per_channel: BTreeMap<ChanId, usize>,
    pub per_lock: BTreeMap<Name, usize>,
    pub total: usize,
}

impl FootprintSample {
    /// Sum over threads only.
    pub fn thread_total(&self) -> usize {
        self.per_thread.values().sum()
    }
}

pub fn snapshot<D: Detector>(detector: &D, step: usize, config: &ConfigOf<D>) -> FootprintSample {
    let k = |x: &D::Knowledge| detector.knowledge_size(x);
    let per_thread: BTreeMap<_, _> = config
        .threads
        .iter()
        .map(|(p, t)| (p.clone(), k(&t.knowledge)))
        .collect();
    let per_variable: BTreeMap<_, _> = config
        .records
        .iter()
        .map(|(z, r)| (z.clone(), detector.record_size(r)))
        .collect();
    let per_channel: BTreeMap<_, _> = config
        .channels
        .iter()
        .map(|(c, ch)| {
            let n = ch.forward.iter().map(|(_, m)| k(m)).sum::<usize>()
                + ch.backward.iter().map(k).sum::<usize>()
                + ch.eot.as_ref().map_or(0, k);
            (c.clone(), n)
        })
        .collect();
    let per_lock: BTreeMap<_, _> = config
        .locks
        .iter()
        .map(|(l, s)| {
            let n = match s {
                Lock::Released(x) => k(x),
                Lock::Acquired => 0,
            };
            (l.clone(), n)
        })
        .collect();
    let total = per_thread.values().sum::<usize>()
        + per_variable.values().sum::<usize>()
        + per_channel.values().sum::<usize>()
        + per_lock.values().sum::<usize>();
    FootprintSample {
        step,
        per_thread,
        per_variable,
        per_channel,
        per_lock,
        total,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultKind {
    Race,
    Ok,
    Panic,
    Deadlock,
    Budget,
}

impl ResultKind {
    pub fn of(outcome: &Outcome) -> Self {
        match outcome {
            Outcome::Terminated => ResultKind::Ok,
            Outcome::Race(_) => ResultKind::Race,
            Outcome::Panic { .. } => ResultKind::Panic,
            Outcome::Deadlock => ResultKind::Deadlock,
            Outcome::StepBudgetExceeded => ResultKind::Budget,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceEntry {
    pub kind: RaceKind,
    pub var: Name,
    pub pid: Pid,
    pub access: AccessKind,
    /// Canonical labels (`m3`) or, for clock detectors, `write p0.1@3`.
    pub conflicting: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanicEntry {
    pub pid: Pid,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub result: ResultKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub race: Option<RaceEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub panic: Option<PanicEntry>,
    pub detector: String,
    /// Scheduler indices; feed them back with `--schedule scripted`.
    pub schedule: Vec<usize>,
    /// Trace events with canonical labels.
    pub trace: Vec<Json>,
    pub footprint: Vec<FootprintSample>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// One compact JSON object per trace event.
    pub fn trace_lines(&self) -> String {
        self.trace.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// Canonical label names for one run.
pub struct Renaming(HashMap<Label, String>);

impl Renaming {
    /// Names for the labels of `trace`, a run of `program` under `rt`.
    pub fn for_run<D: Detector>(rt: &Runtime<D>, program: &Program, trace: &[Event]) -> Self {
        let initial = rt.initial_config(program).threads[&Pid::root()].next_label;
        Renaming::new(initial, trace)
    }

    fn new(initial: u32, trace: &[Event]) -> Self {
        let mut map = HashMap::new();
        for seq in 0..initial {
            map.insert(
                Label {
                    issuer: Pid::root(),
                    seq,
                },
                format!("m{seq}"),
            );
        }
        for e in trace {
            if let Op::Read { label: Some(l), .. } | Op::Write { label: Some(l), .. } = &e.op {
                let next = format!("m{}", map.len());
                map.entry(l.clone()).or_insert(next);
            }
        }
        Renaming(map)
    }

    pub fn label(&self, l: &Label) -> String {
        self.0.get(l).cloned().unwrap_or_else(|| l.to_string())
    }

    fn event(&self, e: &Event) -> Json {
        let mut json = serde_json::to_value(e).expect("events serialize");
        if let (Op::Read { label: Some(l), .. } | Op::Write { label: Some(l), .. }, Some(obj)) =
            (&e.op, json.as_object_mut())
        {
            obj.insert("label".into(), Json::String(self.label(l)));
        }
        json
    }

    fn conflict(&self, c: &Conflict) -> String {
        match c {
            Conflict::Event(a) => self.label(&a.label),
            Conflict::Clock { kind, pid, clock } => {
                let kind = match kind {
                    AccessKind::Read => "read",
                    AccessKind::Write => "write",
                };
                format!("{kind} {pid}@{clock}")
            }
        }
    }
}

/// Assembles the report of one run.
pub fn emit_report<D: Detector>(
    rt: &Runtime<D>,
    program: &Program,
    result: &RunResultOf<D>,
    footprint: Vec<FootprintSample>,
) -> Report {
    let names = Renaming::for_run(rt, program, &result.trace);
    let race = result.outcome.race().map(|r| RaceEntry {
        kind: r.kind,
        var: r.var.clone(),
        pid: r.pid.clone(),
        access: r.access,
        conflicting: r.conflicting.iter().map(|c| names.conflict(c)).collect(),
    });
    let panic = match &result.outcome {
        Outcome::Panic { pid, reason } => Some(PanicEntry {
            pid: pid.clone(),
            reason: reason.to_string(),
        }),
        _ => None,
    };
    Report {
        result: ResultKind::of(&result.outcome),
        race,
        panic,
        detector: rt.detector.name().to_string(),
        schedule: result.indices.clone(),
        trace: result.trace.iter().map(|e| names.event(e)).collect(),
        footprint,
    }
}

/// Runs `program` once, sampling the footprint before the first step and
/// after every step.
pub fn run_with_report<D: Detector>(
    rt: &Runtime<D>,
    program: &Program,
    scheduler: &mut dyn Scheduler,
) -> Result<(RunResultOf<D>, Report), ScheduleError> {
    let mut samples = Vec::new();
    let result = rt.run_observed(program, scheduler, &mut |step, config| {
        samples.push(snapshot(&rt.detector, step, config));
    })?;
    let report = emit_report(rt, program, &result, samples);
    Ok((result, report))
}

/// Canonical rendering of a happens-before set such as `{w(m3,z), r(m4,z)}`.
pub fn render_hb_set(hb: &crate::detector::HbSet, names: &Renaming) -> String {
    let parts: Vec<String> = hb
        .iter()
        .map(|a| {
            let k = match a.kind {
                AccessKind::Read => 'r',
                AccessKind::Write => 'w',
            };
            format!("{k}({},{})", names.label(&a.label), a.var)
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}
