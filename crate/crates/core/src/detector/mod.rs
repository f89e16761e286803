//! Race-detector plug-ins for the interpreter.
//!
//! The runtime is generic over a [`Detector`], which decides what a thread
//! knows about the past ([`Detector::Knowledge`]), what each shared variable
//! remembers about its accesses ([`Detector::Record`]), and how both change on
//! memory accesses and synchronization.

pub mod hbset;
pub mod naked;
pub mod vc;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::names::{Label, Name, Pid};

pub use hbset::{AccessLabel, GcMode, HbSet, HbSetDetector, HbVariant};
pub use naked::Undecorated;
pub use vc::{Epoch, VcDetector, VcMode, VectorClock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RaceKind {
    RaW,
    WaW,
    WaR,
}

impl RaceKind {
    /// Kind of a conflicting pair named by trace occurrence order.
    pub fn of_pair(earlier: AccessKind, later: AccessKind) -> Option<RaceKind> {
        match (earlier, later) {
            (AccessKind::Write, AccessKind::Read) => Some(RaceKind::RaW),
            (AccessKind::Write, AccessKind::Write) => Some(RaceKind::WaW),
            (AccessKind::Read, AccessKind::Write) => Some(RaceKind::WaR),
            (AccessKind::Read, AccessKind::Read) => None,
        }
    }
}

impl fmt::Display for RaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A prior access the accessing thread is unaware of.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Conflict {
    Event(AccessLabel),
    /// Vector-clock detectors do not name events; they name the thread and
    /// the clock of its unseen access.
    Clock {
        kind: AccessKind,
        pid: Pid,
        clock: u64,
    },
}

/// Outcome of a failed access check, before the runtime attaches the context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: RaceKind,
    pub conflicting: Vec<Conflict>,
}

impl Violation {
    pub fn events(kind: RaceKind, events: impl IntoIterator<Item = AccessLabel>) -> Self {
        Violation {
            kind,
            conflicting: events.into_iter().map(Conflict::Event).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceReport {
    pub kind: RaceKind,
    pub var: Name,
    pub pid: Pid,
    pub access: AccessKind,
    pub conflicting: Vec<Conflict>,
}

/// Issues fresh event labels on behalf of one thread.
pub struct LabelSource<'a> {
    pub pid: &'a Pid,
    pub next: &'a mut u32,
}

impl LabelSource<'_> {
    pub fn fresh(&mut self) -> Label {
        let label = Label {
            issuer: self.pid.clone(),
            seq: *self.next,
        };
        *self.next += 1;
        label
    }
}

pub trait Detector: Clone + fmt::Debug {
    /// Happens-before knowledge of a thread; also what travels on channels
    /// and sits in released locks.
    type Knowledge: Clone + fmt::Debug + PartialEq + Eq + Hash;
    /// Per-variable access record.
    type Record: Clone + fmt::Debug + PartialEq + Eq + Hash;

    /// Short name used in reports (`aw`, `war`, `gc`, `vc-djit`, ...).
    fn name(&self) -> &'static str;

    /// Knowledge of the root thread and one record per variable, in order.
    /// `labels` issues the initial write labels.
    fn initial(&self, vars: &[Name], labels: &mut LabelSource<'_>) -> (Self::Knowledge, Vec<Self::Record>);

    /// Content of dummy backward tickets and of never-released locks.
    fn empty(&self) -> Self::Knowledge;

    /// Returns the label of the read, if this detector logs reads.
    fn read(
        &self,
        var: &Name,
        knowledge: &mut Self::Knowledge,
        record: &mut Self::Record,
        labels: &mut LabelSource<'_>,
    ) -> Result<Option<Label>, Violation>;

    /// Returns the label of the write, if this detector names writes.
    fn write(
        &self,
        var: &Name,
        knowledge: &mut Self::Knowledge,
        record: &mut Self::Record,
        labels: &mut LabelSource<'_>,
    ) -> Result<Option<Label>, Violation>;

    /// What `pid` deposits when it hands its knowledge to someone else
    /// (message, backward ticket, EOT, released lock, spawned child).
    fn publish(&self, pid: &Pid, knowledge: &mut Self::Knowledge) -> Self::Knowledge;

    fn learn(&self, knowledge: &mut Self::Knowledge, other: &Self::Knowledge);

    fn spawn(&self, parent: &Pid, knowledge: &mut Self::Knowledge, child: &Pid) -> Self::Knowledge;

    fn rendezvous(&self, a: (&Pid, &mut Self::Knowledge), b: (&Pid, &mut Self::Knowledge));

    /// Offline garbage collection of a thread's knowledge, if supported.
    fn collect(&self, _knowledge: &mut Self::Knowledge, _records: &BTreeMap<Name, Self::Record>) {}

    fn gc_after_sync(&self) -> bool {
        false
    }

    fn gc_every(&self) -> Option<u32> {
        None
    }

    /// Entry count used for footprint statistics.
    fn knowledge_size(&self, knowledge: &Self::Knowledge) -> usize;

    fn record_size(&self, record: &Self::Record) -> usize;
}

/// Detectors selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    Aw,
    War,
    Gc,
    VcDjit,
    VcFastTrack,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::Aw,
        DetectorKind::War,
        DetectorKind::Gc,
        DetectorKind::VcDjit,
        DetectorKind::VcFastTrack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Aw => "aw",
            DetectorKind::War => "war",
            DetectorKind::Gc => "gc",
            DetectorKind::VcDjit => "vc-djit",
            DetectorKind::VcFastTrack => "vc-fasttrack",
        }
    }

    /// Whether write-after-read conflicts are detected.
    pub fn detects_war(self) -> bool {
        self != DetectorKind::Aw
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown detector `{s}` (expected aw, war, gc, vc-djit or vc-fasttrack)"))
    }
}

/// Tuning knobs shared by all detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct DetectorOptions {
    pub gc: GcMode,
    /// Cap on reads remembered per variable; `None` is unlimited.
    pub max_reads: Option<usize>,
}

/// Calls `$body` with `$d` bound to a concrete detector for `$kind`.
#[macro_export]
macro_rules! with_detector {
    ($kind:expr, $opts:expr, |$d:ident| $body:expr) => {{
        let opts: $crate::detector::DetectorOptions = $opts;
        match $kind {
            $crate::detector::DetectorKind::Aw => {
                let $d = $crate::detector::HbSetDetector::new($crate::detector::HbVariant::Aw, opts);
                $body
            }
            $crate::detector::DetectorKind::War => {
                let $d = $crate::detector::HbSetDetector::new($crate::detector::HbVariant::War, opts);
                $body
            }
            $crate::detector::DetectorKind::Gc => {
                let $d = $crate::detector::HbSetDetector::new($crate::detector::HbVariant::Gc, opts);
                $body
            }
            $crate::detector::DetectorKind::VcDjit => {
                let $d = $crate::detector::VcDetector::new($crate::detector::VcMode::Djit);
                $body
            }
            $crate::detector::DetectorKind::VcFastTrack => {
                let $d = $crate::detector::VcDetector::new($crate::detector::VcMode::FastTrack);
                $body
            }
        }
    }};
}
