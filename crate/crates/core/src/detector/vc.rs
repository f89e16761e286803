//! Vector-clock baseline detectors.
//!
//! Lock rules carry over to channels: every message, backward ticket, EOT
//! marker and released lock carries a snapshot of the depositor's clock, after
//! which the depositor increments its own component. Taking a ticket,
//! message, EOT or lock joins the carried clock into the taker's.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AccessKind, Conflict, Detector, DetectorKind, LabelSource, RaceKind, Violation};
use crate::names::{Label, Name, Pid};

/// Map from thread to clock; absent entries are zero.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorClock(BTreeMap<Pid, u64>);

impl VectorClock {
    /// `⊥`
    pub fn bottom() -> Self {
        Self::default()
    }

    pub fn get(&self, pid: &Pid) -> u64 {
        self.0.get(pid).copied().unwrap_or(0)
    }

    pub fn set(&mut self, pid: &Pid, clock: u64) {
        if clock == 0 {
            self.0.remove(pid);
        } else {
            self.0.insert(pid.clone(), clock);
        }
    }

    pub fn inc(&mut self, pid: &Pid) {
        *self.0.entry(pid.clone()).or_insert(0) += 1;
    }

    pub fn join_with(&mut self, other: &VectorClock) {
        for (p, &c) in &other.0 {
            let e = self.0.entry(p.clone()).or_insert(0);
            *e = (*e).max(c);
        }
    }

    pub fn join(&self, other: &VectorClock) -> VectorClock {
        let mut out = self.clone();
        out.join_with(other);
        out
    }

    /// Pointwise `⊑`.
    pub fn le(&self, other: &VectorClock) -> bool {
        self.0.iter().all(|(p, &c)| c <= other.get(p))
    }

    /// Entries `(u, self(u))` with `self(u) > other(u)`.
    pub fn exceeding<'a>(&'a self, other: &'a VectorClock) -> impl Iterator<Item = (&'a Pid, u64)> + 'a {
        self.0
            .iter()
            .filter(move |(p, &c)| c > other.get(p))
            .map(|(p, &c)| (p, c))
    }

    /// Number of non-zero entries.
    pub fn support(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pid, u64)> {
        self.0.iter().map(|(p, &c)| (p, c))
    }
}

impl fmt::Debug for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (p, c)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}↦{c}")?;
        }
        f.write_str("]")
    }
}

impl FromIterator<(Pid, u64)> for VectorClock {
    fn from_iter<I: IntoIterator<Item = (Pid, u64)>>(iter: I) -> Self {
        let mut vc = VectorClock::bottom();
        for (p, c) in iter {
            vc.set(&p, c);
        }
        vc
    }
}

/// `c@t`
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Epoch {
    pub clock: u64,
    pub pid: Pid,
}

impl Epoch {
    pub fn le(&self, vc: &VectorClock) -> bool {
        self.clock <= vc.get(&self.pid)
    }
}

impl fmt::Debug for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.clock, self.pid)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ReadState {
    None,
    Epoch(Epoch),
    /// Inflated after two unordered reads; never deflates.
    Shared(VectorClock),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum VcRecord {
    Djit { write: VectorClock, read: VectorClock },
    FastTrack { write: Option<Epoch>, read: ReadState },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VcMode {
    Djit,
    FastTrack,
}

#[derive(Clone, Debug)]
pub struct VcDetector {
    pub mode: VcMode,
}

impl VcDetector {
    pub fn new(mode: VcMode) -> Self {
        VcDetector { mode }
    }
}

fn clock_conflicts(kind: AccessKind, vc: &VectorClock, now: &VectorClock) -> Vec<Conflict> {
    vc.exceeding(now)
        .map(|(p, c)| Conflict::Clock {
            kind,
            pid: p.clone(),
            clock: c,
        })
        .collect()
}

fn epoch_conflict(kind: AccessKind, e: &Epoch, now: &VectorClock) -> Vec<Conflict> {
    if e.le(now) {
        Vec::new()
    } else {
        vec![Conflict::Clock {
            kind,
            pid: e.pid.clone(),
            clock: e.clock,
        }]
    }
}

fn read_conflicts(read: &ReadState, now: &VectorClock) -> Vec<Conflict> {
    match read {
        ReadState::None => Vec::new(),
        ReadState::Epoch(e) => epoch_conflict(AccessKind::Read, e, now),
        ReadState::Shared(vc) => clock_conflicts(AccessKind::Read, vc, now),
    }
}

fn fail_if(kind: RaceKind, conflicting: Vec<Conflict>) -> Result<(), Violation> {
    if conflicting.is_empty() {
        Ok(())
    } else {
        Err(Violation { kind, conflicting })
    }
}

impl Detector for VcDetector {
    type Knowledge = VectorClock;
    type Record = VcRecord;

    fn name(&self) -> &'static str {
        match self.mode {
            VcMode::Djit => DetectorKind::VcDjit,
            VcMode::FastTrack => DetectorKind::VcFastTrack,
        }
        .name()
    }

    fn initial(&self, vars: &[Name], labels: &mut LabelSource<'_>) -> (VectorClock, Vec<VcRecord>) {
        let root: VectorClock = [(labels.pid.clone(), 1)].into_iter().collect();
        let record = match self.mode {
            VcMode::Djit => VcRecord::Djit {
                write: VectorClock::bottom(),
                read: VectorClock::bottom(),
            },
            VcMode::FastTrack => VcRecord::FastTrack {
                write: None,
                read: ReadState::None,
            },
        };
        (root, vec![record; vars.len()])
    }

    fn empty(&self) -> VectorClock {
        VectorClock::bottom()
    }

    fn read(
        &self,
        _var: &Name,
        now: &mut VectorClock,
        record: &mut VcRecord,
        labels: &mut LabelSource<'_>,
    ) -> Result<Option<Label>, Violation> {
        let t = labels.pid;
        let own = now.get(t);
        match record {
            VcRecord::Djit { write, read } => {
                fail_if(RaceKind::RaW, clock_conflicts(AccessKind::Write, write, now))?;
                read.set(t, own);
            }
            VcRecord::FastTrack { write, read } => {
                if let Some(w) = write {
                    fail_if(RaceKind::RaW, epoch_conflict(AccessKind::Write, w, now))?;
                }
                let mine = Epoch {
                    clock: own,
                    pid: t.clone(),
                };
                *read = match std::mem::replace(read, ReadState::None) {
                    ReadState::None => ReadState::Epoch(mine),
                    ReadState::Epoch(e) if e.pid == *t || e.le(now) => ReadState::Epoch(mine),
                    ReadState::Epoch(e) => {
                        ReadState::Shared([(e.pid, e.clock), (t.clone(), own)].into_iter().collect())
                    }
                    ReadState::Shared(mut vc) => {
                        vc.set(t, own);
                        ReadState::Shared(vc)
                    }
                };
            }
        }
        Ok(None)
    }

    fn write(
        &self,
        _var: &Name,
        now: &mut VectorClock,
        record: &mut VcRecord,
        labels: &mut LabelSource<'_>,
    ) -> Result<Option<Label>, Violation> {
        let t = labels.pid;
        let own = now.get(t);
        match record {
            VcRecord::Djit { write, read } => {
                fail_if(RaceKind::WaR, clock_conflicts(AccessKind::Read, read, now))?;
                fail_if(RaceKind::WaW, clock_conflicts(AccessKind::Write, write, now))?;
                write.set(t, own);
            }
            VcRecord::FastTrack { write, read } => {
                fail_if(RaceKind::WaR, read_conflicts(read, now))?;
                if let Some(w) = write {
                    fail_if(RaceKind::WaW, epoch_conflict(AccessKind::Write, w, now))?;
                }
                *write = Some(Epoch {
                    clock: own,
                    pid: t.clone(),
                });
            }
        }
        Ok(None)
    }

    fn publish(&self, pid: &Pid, now: &mut VectorClock) -> VectorClock {
        let snapshot = now.clone();
        now.inc(pid);
        snapshot
    }

    fn learn(&self, now: &mut VectorClock, other: &VectorClock) {
        now.join_with(other);
    }

    fn spawn(&self, parent: &Pid, now: &mut VectorClock, child: &Pid) -> VectorClock {
        let mut c = now.clone();
        c.set(child, 1);
        now.inc(parent);
        c
    }

    fn rendezvous(&self, a: (&Pid, &mut VectorClock), b: (&Pid, &mut VectorClock)) {
        let merged = a.1.join(b.1);
        *a.1 = merged.clone();
        *b.1 = merged;
        a.1.inc(a.0);
        b.1.inc(b.0);
    }

    fn knowledge_size(&self, now: &VectorClock) -> usize {
        now.support()
    }

    fn record_size(&self, record: &VcRecord) -> usize {
        match record {
            VcRecord::Djit { write, read } => write.support() + read.support(),
            VcRecord::FastTrack { write, read } => {
                usize::from(write.is_some())
                    + match read {
                        ReadState::None => 0,
                        ReadState::Epoch(_) => 1,
                        ReadState::Shared(vc) => vc.support(),
                    }
            }
        }
    }
}
