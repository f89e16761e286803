//! Happens-before-set detectors.
//!
//! Three variants share the same thread knowledge (a set of labelled access
//! events) and differ in what a variable's record keeps:
//!
//! * [`HbVariant::Aw`]: every write label; reads are not logged, so only
//!   after-write races (RaW, WaW) are caught.
//! * [`HbVariant::War`]: every read and write label.
//! * [`HbVariant::Gc`]: the most recent write plus the reads since, with
//!   stale entries purged from the accessing thread on every access and,
//!   optionally, from any thread after synchronization ([`offline_gc`]).

use std::collections::btree_set;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AccessKind, Detector, DetectorKind, DetectorOptions, LabelSource, RaceKind, Violation};
use crate::names::{Label, Name, Pid};

/// `⟨m, kind, z⟩`: the access event labelled `m` on variable `z`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccessLabel {
    pub var: Name,
    pub kind: AccessKind,
    pub label: Label,
}

impl AccessLabel {
    pub fn read(label: Label, var: Name) -> Self {
        AccessLabel {
            var,
            kind: AccessKind::Read,
            label,
        }
    }

    pub fn write(label: Label, var: Name) -> Self {
        AccessLabel {
            var,
            kind: AccessKind::Write,
            label,
        }
    }
}

impl fmt::Debug for AccessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            AccessKind::Read => 'r',
            AccessKind::Write => 'w',
        };
        write!(f, "{k}({},{})", self.label, self.var)
    }
}

#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HbSet(BTreeSet<AccessLabel>);

impl HbSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> btree_set::Iter<'_, AccessLabel> {
        self.0.iter()
    }

    pub fn insert(&mut self, a: AccessLabel) -> bool {
        self.0.insert(a)
    }

    pub fn remove(&mut self, a: &AccessLabel) -> bool {
        self.0.remove(a)
    }

    pub fn contains(&self, a: &AccessLabel) -> bool {
        self.0.contains(a)
    }

    pub fn union_with(&mut self, other: &HbSet) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn union(&self, other: &HbSet) -> HbSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn is_subset(&self, other: &HbSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn difference(&self, other: &HbSet) -> HbSet {
        HbSet(self.0.difference(&other.0).cloned().collect())
    }

    fn filter(&self, keep: impl Fn(&AccessLabel) -> bool) -> HbSet {
        HbSet(self.0.iter().filter(|a| keep(a)).cloned().collect())
    }

    /// `↓z`
    pub fn project_var(&self, var: &str) -> HbSet {
        self.filter(|a| &*a.var == var)
    }

    /// `↓?`
    pub fn reads(&self) -> HbSet {
        self.filter(|a| a.kind == AccessKind::Read)
    }

    /// `↓!`
    pub fn writes(&self) -> HbSet {
        self.filter(|a| a.kind == AccessKind::Write)
    }

    /// Removes every event on `var`.
    pub fn forget_var(&mut self, var: &str) {
        self.0.retain(|a| &*a.var != var);
    }

    pub fn retain(&mut self, keep: impl FnMut(&AccessLabel) -> bool) {
        self.0.retain(keep);
    }
}

impl fmt::Debug for HbSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

impl FromIterator<AccessLabel> for HbSet {
    fn from_iter<I: IntoIterator<Item = AccessLabel>>(iter: I) -> Self {
        HbSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a HbSet {
    type Item = &'a AccessLabel;
    type IntoIter = btree_set::Iter<'a, AccessLabel>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Record of the after-write detector: all write events on the variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AwRecord {
    pub writes: HbSet,
}

/// Record of the full detector: all read and write events on the variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WarRecord {
    pub accesses: HbSet,
}

/// Record of the garbage-collecting detector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GcRecord {
    pub last_write: Label,
    /// Reads accumulated since `last_write`; read events on this variable only.
    pub reads_since: HbSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum HbRecord {
    Aw(AwRecord),
    War(WarRecord),
    Gc(GcRecord),
}

impl HbRecord {
    pub fn len(&self) -> usize {
        match self {
            HbRecord::Aw(r) => r.writes.len(),
            HbRecord::War(r) => r.accesses.len(),
            HbRecord::Gc(r) => 1 + r.reads_since.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn missing(required: &HbSet, hb: &HbSet) -> HbSet {
    required.difference(hb)
}

fn cap_reads(set: &mut HbSet, cap: Option<usize>) {
    if let Some(cap) = cap {
        while set.reads().len() > cap {
            // Evicts the smallest read in set order; the detector then misses
            // conflicts with it, as a bounded shadow cell would.
            let victim = set.reads().iter().next().cloned().expect("non-empty");
            set.remove(&victim);
        }
    }
}

pub fn read_aw(hb: &HbSet, record: &AwRecord) -> Result<(), Violation> {
    let unseen = missing(&record.writes, hb);
    if unseen.is_empty() {
        Ok(())
    } else {
        Err(Violation::events(RaceKind::RaW, unseen.0))
    }
}

pub fn write_aw(
    var: &Name,
    hb: &mut HbSet,
    record: &mut AwRecord,
    labels: &mut LabelSource<'_>,
) -> Result<Label, Violation> {
    let unseen = missing(&record.writes, hb);
    if !unseen.is_empty() {
        return Err(Violation::events(RaceKind::WaW, unseen.0));
    }
    let m = labels.fresh();
    let event = AccessLabel::write(m.clone(), var.clone());
    record.writes.insert(event.clone());
    hb.insert(event);
    Ok(m)
}

pub fn read_war(
    var: &Name,
    hb: &mut HbSet,
    record: &mut WarRecord,
    labels: &mut LabelSource<'_>,
    max_reads: Option<usize>,
) -> Result<Label, Violation> {
    let unseen = missing(&record.accesses.writes(), hb);
    if !unseen.is_empty() {
        return Err(Violation::events(RaceKind::RaW, unseen.0));
    }
    let m = labels.fresh();
    let event = AccessLabel::read(m.clone(), var.clone());
    record.accesses.insert(event.clone());
    cap_reads(&mut record.accesses, max_reads);
    hb.insert(event);
    Ok(m)
}

/// WaR is checked before WaW: when both apply, the read is the more recent
/// conflict.
pub fn write_war(
    var: &Name,
    hb: &mut HbSet,
    record: &mut WarRecord,
    labels: &mut LabelSource<'_>,
) -> Result<Label, Violation> {
    let unseen_reads = missing(&record.accesses.reads(), hb);
    if !unseen_reads.is_empty() {
        return Err(Violation::events(RaceKind::WaR, unseen_reads.0));
    }
    let unseen_writes = missing(&record.accesses.writes(), hb);
    if !unseen_writes.is_empty() {
        return Err(Violation::events(RaceKind::WaW, unseen_writes.0));
    }
    let m = labels.fresh();
    let event = AccessLabel::write(m.clone(), var.clone());
    record.accesses.insert(event.clone());
    hb.insert(event);
    Ok(m)
}

pub fn read_gc(
    var: &Name,
    hb: &mut HbSet,
    record: &mut GcRecord,
    labels: &mut LabelSource<'_>,
    max_reads: Option<usize>,
) -> Result<Label, Violation> {
    let last = AccessLabel::write(record.last_write.clone(), var.clone());
    if !hb.contains(&last) {
        return Err(Violation::events(RaceKind::RaW, [last]));
    }
    let m = labels.fresh();
    let event = AccessLabel::read(m.clone(), var.clone());
    let known = hb.project_var(var);
    let mut reads = record.reads_since.difference(&known);
    reads.insert(event.clone());
    cap_reads(&mut reads, max_reads);
    record.reads_since = reads;
    hb.forget_var(var);
    hb.insert(event);
    hb.insert(last);
    Ok(m)
}

pub fn write_gc(
    var: &Name,
    hb: &mut HbSet,
    record: &mut GcRecord,
    labels: &mut LabelSource<'_>,
) -> Result<Label, Violation> {
    let unseen_reads = missing(&record.reads_since, hb);
    if !unseen_reads.is_empty() {
        return Err(Violation::events(RaceKind::WaR, unseen_reads.0));
    }
    let last = AccessLabel::write(record.last_write.clone(), var.clone());
    if !hb.contains(&last) {
        return Err(Violation::events(RaceKind::WaW, [last]));
    }
    let m = labels.fresh();
    hb.forget_var(var);
    hb.insert(AccessLabel::write(m.clone(), var.clone()));
    *record = GcRecord {
        last_write: m.clone(),
        reads_since: HbSet::new(),
    };
    Ok(m)
}

/// Drops every write that is not the variable's latest and every read not
/// among the reads since that write.
pub fn offline_gc(hb: &mut HbSet, records: &BTreeMap<Name, GcRecord>) {
    hb.retain(|a| match records.get(&a.var) {
        Some(rec) => match a.kind {
            AccessKind::Write => a.label == rec.last_write,
            AccessKind::Read => rec.reads_since.contains(a),
        },
        None => true,
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HbVariant {
    Aw,
    War,
    Gc,
}

/// When the garbage-collecting variant runs offline collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GcMode {
    Off,
    /// After every receive, rendezvous, acquire and backward-ticket
    /// consumption, on the thread that synchronized.
    #[default]
    Eager,
    /// On every thread after every `n` steps.
    Every(u32),
}

impl std::str::FromStr for GcMode {
    type Err = String;

    /// `off`, `eager`, or `every-N` (also spelled `offline-every-N`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(GcMode::Off),
            "eager" => Ok(GcMode::Eager),
            _ => s
                .strip_prefix("offline-")
                .unwrap_or(s)
                .strip_prefix("every-")
                .and_then(|n| n.parse().ok())
                .filter(|n| *n > 0)
                .map(GcMode::Every)
                .ok_or_else(|| format!("unknown gc mode `{s}` (expected off, eager or every-N with N > 0)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HbSetDetector {
    pub variant: HbVariant,
    pub options: DetectorOptions,
}

impl HbSetDetector {
    pub fn new(variant: HbVariant, options: DetectorOptions) -> Self {
        HbSetDetector { variant, options }
    }
}

impl Detector for HbSetDetector {
    type Knowledge = HbSet;
    type Record = HbRecord;

    fn name(&self) -> &'static str {
        match self.variant {
            HbVariant::Aw => DetectorKind::Aw,
            HbVariant::War => DetectorKind::War,
            HbVariant::Gc => DetectorKind::Gc,
        }
        .name()
    }

    fn initial(&self, vars: &[Name], labels: &mut LabelSource<'_>) -> (HbSet, Vec<HbRecord>) {
        let mut root = HbSet::new();
        let mut records = Vec::with_capacity(vars.len());
        for var in vars {
            let m = labels.fresh();
            let event = AccessLabel::write(m.clone(), var.clone());
            root.insert(event.clone());
            let single: HbSet = [event].into_iter().collect();
            records.push(match self.variant {
                HbVariant::Aw => HbRecord::Aw(AwRecord { writes: single }),
                HbVariant::War => HbRecord::War(WarRecord { accesses: single }),
                HbVariant::Gc => HbRecord::Gc(GcRecord {
                    last_write: m,
                    reads_since: HbSet::new(),
                }),
            });
        }
        (root, records)
    }

    fn empty(&self) -> HbSet {
        HbSet::new()
    }

    fn read(
        &self,
        var: &Name,
        hb: &mut HbSet,
        record: &mut HbRecord,
        labels: &mut LabelSource<'_>,
    ) -> Result<Option<Label>, Violation> {
        let cap = self.options.max_reads;
        match record {
            HbRecord::Aw(r) => read_aw(hb, r).map(|()| None),
            HbRecord::War(r) => read_war(var, hb, r, labels, cap).map(Some),
            HbRecord::Gc(r) => read_gc(var, hb, r, labels, cap).map(Some),
        }
    }

    fn write(
        &self,
        var: &Name,
        hb: &mut HbSet,
        record: &mut HbRecord,
        labels: &mut LabelSource<'_>,
    ) -> Result<Option<Label>, Violation> {
        match record {
            HbRecord::Aw(r) => write_aw(var, hb, r, labels).map(Some),
            HbRecord::War(r) => write_war(var, hb, r, labels).map(Some),
            HbRecord::Gc(r) => write_gc(var, hb, r, labels).map(Some),
        }
    }

    fn publish(&self, _pid: &Pid, hb: &mut HbSet) -> HbSet {
        hb.clone()
    }

    fn learn(&self, hb: &mut HbSet, other: &HbSet) {
        hb.union_with(other);
    }

    fn spawn(&self, _parent: &Pid, hb: &mut HbSet, _child: &Pid) -> HbSet {
        hb.clone()
    }

    fn rendezvous(&self, a: (&Pid, &mut HbSet), b: (&Pid, &mut HbSet)) {
        let merged = a.1.union(b.1);
        *a.1 = merged.clone();
        *b.1 = merged;
    }

    fn collect(&self, hb: &mut HbSet, records: &BTreeMap<Name, HbRecord>) {
        if self.variant != HbVariant::Gc {
            return;
        }
        let gc: BTreeMap<Name, GcRecord> = records
            .iter()
            .filter_map(|(z, r)| match r {
                HbRecord::Gc(g) => Some((z.clone(), g.clone())),
                _ => None,
            })
            .collect();
        offline_gc(hb, &gc);
    }

    fn gc_after_sync(&self) -> bool {
        self.variant == HbVariant::Gc && self.options.gc == GcMode::Eager
    }

    fn gc_every(&self) -> Option<u32> {
        match (self.variant, self.options.gc) {
            (HbVariant::Gc, GcMode::Every(n)) if n > 0 => Some(n),
            _ => None,
        }
    }

    fn knowledge_size(&self, hb: &HbSet) -> usize {
        hb.len()
    }

    fn record_size(&self, record: &HbRecord) -> usize {
        record.len()
    }
}
