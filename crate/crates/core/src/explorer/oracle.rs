//! Happens-before order of a finished trace, computed from the events alone.
//!
//! The oracle shares no code with the detectors. It rebuilds the order from
//! program order and the synchronization each event records:
//!
//! - `send_i(c)` precedes `recvComplete_i(c)`;
//! - `recv_i(c)` precedes `sendComplete_{i+k}(c)` for capacity `k`;
//! - a spawn precedes the child's first event;
//! - a rendezvous belongs to the program order of both parties;
//! - `close(c)` precedes every end-of-transmission receipt on `c`;
//! - a release precedes the next acquire of the same lock.
//!
//! Initial writes carry no events: the root knows them from the start, so
//! they precede everything.

use std::collections::{BTreeMap, HashMap};

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::detector::{AccessKind, RaceKind};
use crate::names::{ChanId, Name, Pid};
use crate::runtime::{Event, Op};
use crate::syntax::Value;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("event {index}: channel {chan} was never made")]
    UnknownChannel { index: usize, chan: ChanId },
    #[error("event {index}: {what} on unbuffered channel {chan}")]
    Unbuffered {
        index: usize,
        chan: ChanId,
        what: &'static str,
    },
    #[error("event {index}: {what} #{found} on {chan}, expected #{expected}")]
    OutOfOrder {
        index: usize,
        chan: ChanId,
        what: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("event {index}: receive #{seq} on {chan} precedes the matching send")]
    ReceiveBeforeSend { index: usize, chan: ChanId, seq: u32 },
    #[error("event {index}: send #{seq} on {chan} uses a slot no receive has freed")]
    NoFreeSlot { index: usize, chan: ChanId, seq: u32 },
    #[error("event {index}: receive #{seq} on {chan} got {found}, but {expected} was sent (breaks first-in-first-out order)")]
    Fifo {
        index: usize,
        chan: ChanId,
        seq: u32,
        expected: Value,
        found: Value,
    },
    #[error("event {index}: end of transmission on {chan} before it was closed")]
    EotBeforeClose { index: usize, chan: ChanId },
    #[error("event {index}: thread {pid} acts before it is spawned")]
    UnspawnedThread { index: usize, pid: Pid },
}

/// Strict happens-before over the events of one trace.
#[derive(Clone, Debug)]
pub struct HbOrder {
    pub events: Vec<Event>,
    /// `ancestors[j]` holds every `i` with `i < j` in the order.
    ancestors: Vec<FixedBitSet>,
}

impl HbOrder {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Whether event `i` happens before event `j`.
    pub fn before(&self, i: usize, j: usize) -> bool {
        i != j && self.ancestors[j].contains(i)
    }

    pub fn ordered(&self, i: usize, j: usize) -> bool {
        self.before(i, j) || self.before(j, i)
    }

    /// Index of the first event satisfying `pred`.
    pub fn position(&self, pred: impl Fn(&Event) -> bool) -> Option<usize> {
        self.events.iter().position(pred)
    }
}

#[derive(Default)]
struct ChanState {
    capacity: u32,
    sends: Vec<(usize, Value)>,
    recvs: Vec<usize>,
    completes: u32,
    send_completes: u32,
    close: Option<usize>,
}

pub fn build_hb_order(trace: &[Event]) -> Result<HbOrder, OracleError> {
    let n = trace.len();
    let mut ancestors: Vec<FixedBitSet> = Vec::with_capacity(n);
    let mut last: HashMap<Pid, usize> = HashMap::new();
    // Spawned threads not yet seen, with their spawn event.
    let mut pending: HashMap<Pid, usize> = HashMap::new();
    let mut chans: HashMap<ChanId, ChanState> = HashMap::new();
    let mut releases: HashMap<Name, usize> = HashMap::new();
    let root = Pid::root();

    for (index, event) in trace.iter().enumerate() {
        let mut preds: Vec<usize> = Vec::new();
        let mut program_order = |pid: &Pid, preds: &mut Vec<usize>| -> Result<(), OracleError> {
            if let Some(&i) = last.get(pid) {
                preds.push(i);
            } else if let Some(i) = pending.remove(pid) {
                preds.push(i);
            } else if *pid != root {
                return Err(OracleError::UnspawnedThread {
                    index,
                    pid: pid.clone(),
                });
            }
            last.insert(pid.clone(), index);
            Ok(())
        };
        program_order(&event.pid, &mut preds)?;

        let chan_state = |chans: &mut HashMap<ChanId, ChanState>, chan: &ChanId| {
            if chans.contains_key(chan) {
                Ok(())
            } else {
                Err(OracleError::UnknownChannel {
                    index,
                    chan: chan.clone(),
                })
            }
        };

        match &event.op {
            Op::Make { chan, capacity } => {
                chans.insert(
                    chan.clone(),
                    ChanState {
                        capacity: *capacity,
                        ..ChanState::default()
                    },
                );
            }
            Op::Spawn { child } => {
                pending.insert(child.clone(), index);
            }
            Op::Rendezvous { receiver, chan, .. } => {
                chan_state(&mut chans, chan)?;
                program_order(receiver, &mut preds)?;
            }
            Op::Send { chan, seq, value } => {
                chan_state(&mut chans, chan)?;
                let st = chans.get_mut(chan).expect("checked");
                unbuffered(st, index, chan, "buffered send")?;
                expect_seq(index, chan, "send", st.sends.len() as u32, *seq)?;
                st.sends.push((index, value.clone()));
            }
            Op::SendComplete { chan, seq } => {
                chan_state(&mut chans, chan)?;
                let st = chans.get_mut(chan).expect("checked");
                unbuffered(st, index, chan, "buffered send")?;
                expect_seq(index, chan, "send completion", st.send_completes, *seq)?;
                st.send_completes += 1;
                if let Some(freed) = seq.checked_sub(st.capacity) {
                    let Some(&i) = st.recvs.get(freed as usize) else {
                        return Err(OracleError::NoFreeSlot {
                            index,
                            chan: chan.clone(),
                            seq: *seq,
                        });
                    };
                    preds.push(i);
                }
            }
            Op::Recv { chan, seq } => {
                chan_state(&mut chans, chan)?;
                let st = chans.get_mut(chan).expect("checked");
                unbuffered(st, index, chan, "buffered receive")?;
                expect_seq(index, chan, "receive", st.recvs.len() as u32, *seq)?;
                st.recvs.push(index);
            }
            Op::RecvComplete { chan, seq, value } => {
                chan_state(&mut chans, chan)?;
                let st = chans.get_mut(chan).expect("checked");
                unbuffered(st, index, chan, "buffered receive")?;
                expect_seq(index, chan, "receive completion", st.completes, *seq)?;
                st.completes += 1;
                let Some((i, sent)) = st.sends.get(*seq as usize) else {
                    return Err(OracleError::ReceiveBeforeSend {
                        index,
                        chan: chan.clone(),
                        seq: *seq,
                    });
                };
                if sent != value {
                    return Err(OracleError::Fifo {
                        index,
                        chan: chan.clone(),
                        seq: *seq,
                        expected: sent.clone(),
                        found: value.clone(),
                    });
                }
                preds.push(*i);
            }
            Op::Close { chan } => {
                chan_state(&mut chans, chan)?;
                chans.get_mut(chan).expect("checked").close = Some(index);
            }
            Op::RecvEot { chan } => {
                chan_state(&mut chans, chan)?;
                let Some(i) = chans[chan].close else {
                    return Err(OracleError::EotBeforeClose {
                        index,
                        chan: chan.clone(),
                    });
                };
                preds.push(i);
            }
            Op::Acquire { lock } => {
                if let Some(&i) = releases.get(lock) {
                    preds.push(i);
                }
            }
            Op::Release { lock } => {
                releases.insert(lock.clone(), index);
            }
            Op::Read { .. } | Op::Write { .. } | Op::Tau => {}
        }

        let mut set = FixedBitSet::with_capacity(n);
        for p in preds {
            set.union_with(&ancestors[p]);
            set.insert(p);
        }
        ancestors.push(set);
    }
    Ok(HbOrder {
        events: trace.to_vec(),
        ancestors,
    })
}

fn unbuffered(st: &ChanState, index: usize, chan: &ChanId, what: &'static str) -> Result<(), OracleError> {
    if st.capacity == 0 {
        Err(OracleError::Unbuffered {
            index,
            chan: chan.clone(),
            what,
        })
    } else {
        Ok(())
    }
}

fn expect_seq(index: usize, chan: &ChanId, what: &'static str, expected: u32, found: u32) -> Result<(), OracleError> {
    if expected == found {
        Ok(())
    } else {
        Err(OracleError::OutOfOrder {
            index,
            chan: chan.clone(),
            what,
            expected,
            found,
        })
    }
}

/// Two conflicting accesses unordered by happens-before, `earlier` first in
/// the trace.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RacePair {
    pub kind: RaceKind,
    pub var: Name,
    pub earlier: usize,
    pub later: usize,
}

/// Every unordered conflicting pair, by position of the later event and then
/// of the earlier one.
pub fn classify_races(order: &HbOrder) -> Vec<RacePair> {
    let mut by_var: BTreeMap<&Name, Vec<(usize, AccessKind)>> = BTreeMap::new();
    let mut out = Vec::new();
    for (j, event) in order.events.iter().enumerate() {
        let Some((var, kind)) = event.op.access() else {
            continue;
        };
        let prior = by_var.entry(var).or_default();
        for &(i, earlier) in prior.iter() {
            if let Some(race) = RaceKind::of_pair(earlier, kind) {
                if !order.before(i, j) {
                    out.push(RacePair {
                        kind: race,
                        var: var.clone(),
                        earlier: i,
                        later: j,
                    });
                }
            }
        }
        prior.push((j, kind));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::detector::Undecorated;
    use crate::runtime::{RuleScript, Runtime, ScriptedScheduler};

    fn trace_of(name: &str, script: &[usize]) -> Vec<Event> {
        let rt = Runtime::new(Undecorated);
        let r = rt
            .run(&corpus::program(name), &mut ScriptedScheduler::new(script.to_vec()))
            .unwrap();
        r.trace
    }

    fn p(path: &[u32]) -> Pid {
        path.iter().fold(Pid::root(), |acc, k| acc.child(*k))
    }

    fn access(order: &HbOrder, pid: &Pid, kind: AccessKind) -> usize {
        order
            .position(|e| &e.pid == pid && e.op.access().map(|a| a.1) == Some(kind))
            .unwrap()
    }

    #[test]
    fn message_passing_orders_write_before_read() {
        // make, spawn, spawn, then p0.1 writes and sends, p0.2 receives and reads.
        let trace = trace_of("message-passing", &[0, 0, 0, 0, 0, 0, 0]);
        let order = build_hb_order(&trace).unwrap();
        let w = access(&order, &p(&[1]), AccessKind::Write);
        let r = access(&order, &p(&[2]), AccessKind::Read);
        assert!(order.before(w, r));
        assert!(classify_races(&order).is_empty());
    }

    #[test]
    fn single_thread_is_totally_ordered() {
        let prog =
            crate::syntax::parse("var x = 0; main { x := 1; let a = load x in let c = make(chan, 1) in c <- a; <- c }")
                .unwrap();
        let r = Runtime::new(Undecorated)
            .run(&prog, &mut ScriptedScheduler::new(vec![0; 5]))
            .unwrap();
        let order = build_hb_order(&r.trace).unwrap();
        for j in 0..order.len() {
            for i in 0..j {
                assert!(order.before(i, j), "{i} {j}");
                assert!(!order.before(j, i));
            }
        }
    }

    #[test]
    fn listing1_write_first_is_one_raw() {
        let trace = trace_of("listing1", &[0, 1, 0]);
        let races = classify_races(&build_hb_order(&trace).unwrap());
        assert_eq!(races.len(), 1);
        assert_eq!(races[0].kind, RaceKind::RaW);
    }

    #[test]
    fn conditional_race_capacity_two_leaves_write_and_read_unordered() {
        // make, go, go, send 0, send 1, p0.1 writes, p0.1 receives 0,
        // p0.2 receives 1, p0.2 reads.
        let rt = Runtime::new(Undecorated);
        let prog = corpus::program("conditional-race-k2");
        use crate::runtime::Rule::*;
        let root = Pid::root();
        let mut sched = RuleScript::new([
            (root.clone(), Make),
            (root.clone(), Go),
            (root.clone(), Go),
            (root.clone(), Send),
            (root.clone(), Send),
            (p(&[1]), Write),
            (p(&[1]), Recv),
            (p(&[2]), Recv),
            (p(&[2]), Read),
        ]);
        let r = rt.run(&prog, &mut sched).unwrap();
        let order = build_hb_order(&r.trace).unwrap();
        let w = access(&order, &p(&[1]), AccessKind::Write);
        let rd = access(&order, &p(&[2]), AccessKind::Read);
        assert!(!order.ordered(w, rd));
        let races = classify_races(&order);
        assert_eq!(races.len(), 1);
        assert_eq!((races[0].earlier, races[0].later), (w, rd));
    }

    #[test]
    fn fifo_violation_is_rejected() {
        let mut trace = trace_of("message-passing", &[0, 0, 0, 0, 0, 0, 0]);
        for e in &mut trace {
            if let Op::RecvComplete { value, .. } = &mut e.op {
                *value = Value::Int(99);
            }
        }
        assert!(matches!(build_hb_order(&trace), Err(OracleError::Fifo { .. })));
    }

    #[test]
    fn receive_before_send_is_rejected() {
        let trace = trace_of("message-passing", &[0, 0, 0, 0, 0, 0, 0]);
        let send = trace.iter().position(|e| matches!(e.op, Op::Send { .. })).unwrap();
        let mut broken = trace.clone();
        let recv: Vec<Event> = broken
            .iter()
            .filter(|e| matches!(e.op, Op::Recv { .. } | Op::RecvComplete { .. }))
            .cloned()
            .collect();
        broken.retain(|e| !matches!(e.op, Op::Recv { .. } | Op::RecvComplete { .. }));
        for (k, e) in recv.into_iter().enumerate() {
            broken.insert(send + k, e);
        }
        assert!(build_hb_order(&broken).is_err());
    }
}
