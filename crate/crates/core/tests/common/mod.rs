//! Invariant checks shared by the property suites and the acceptance target.
//! Each takes generated inputs and fails with a [`TestCaseError`].

#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hbrace::detector::hbset::HbRecord;
use hbrace::detector::{AccessLabel, Detector, DetectorOptions, GcMode, HbSet, HbSetDetector, HbVariant, VectorClock};
use hbrace::explorer::{build_hb_order, verdict_of, verdict_on};
use hbrace::gen::random_program;
use hbrace::names::{Label, Pid};
use hbrace::runtime::{ConfigOf, Op, RandomScheduler, Runtime};
use hbrace::syntax::Program;

pub const CASES: u32 = 1000;

pub fn program(seed: u64) -> Program {
    random_program(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn gc(mode: GcMode) -> Runtime<HbSetDetector> {
    Runtime::new(HbSetDetector::new(
        HbVariant::Gc,
        DetectorOptions {
            gc: mode,
            max_reads: None,
        },
    ))
}

fn last_write(config: &ConfigOf<HbSetDetector>, var: &str) -> Option<Label> {
    match config.records.get(var)? {
        HbRecord::Gc(g) => Some(g.last_write.clone()),
        _ => None,
    }
}

/// Buffered channels hold `capacity` entries across both queues until
/// closed, unbuffered ones hold none; labels, pids and channels are issued
/// once; receives complete in send order (the oracle rejects anything else).
pub fn channels_fifo_freshness(prog_seed: u64, seed: u64) -> Result<(), TestCaseError> {
    let prog = program(prog_seed);
    let rt = gc(GcMode::Eager);
    let mut broken = Vec::new();
    let r = rt
        .run_observed(&prog, &mut RandomScheduler::new(seed), &mut |step, c| {
            for (id, ch) in &c.channels {
                let held = ch.forward.len() + ch.backward.len();
                let ok = if ch.capacity == 0 {
                    held == 0
                } else {
                    ch.is_closed() || held == ch.capacity as usize
                };
                if !ok {
                    broken.push(format!("step {step}: {id} holds {held}"));
                }
            }
        })
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(broken.is_empty(), "{broken:?}");

    let mut labels = BTreeSet::new();
    let mut pids = BTreeSet::from([Pid::root()]);
    let mut chans = BTreeSet::new();
    for e in &r.trace {
        let fresh = match &e.op {
            Op::Read { label: Some(l), .. } | Op::Write { label: Some(l), .. } => labels.insert(l.clone()),
            Op::Spawn { child } => pids.insert(child.clone()),
            Op::Make { chan, .. } => chans.insert(chan.clone()),
            _ => true,
        };
        prop_assert!(fresh, "reissued name in {:?}", e);
    }
    prop_assert!(build_hb_order(&r.trace).is_ok(), "trace rejected by the oracle");
    Ok(())
}

/// With collection after every step, each thread knows at most one write per
/// variable, and it is the latest. A thread that just accessed a variable
/// knows exactly that write under any mode.
pub fn gc_single_write(prog_seed: u64, seed: u64) -> Result<(), TestCaseError> {
    let prog = program(prog_seed);
    let mut broken = Vec::new();
    gc(GcMode::Every(1))
        .run_observed(&prog, &mut RandomScheduler::new(seed), &mut |step, c| {
            for (pid, t) in &c.threads {
                for w in t.knowledge.writes().iter() {
                    if Some(&w.label) != last_write(c, &w.var).as_ref() {
                        broken.push(format!("step {step}: {pid} keeps stale {w:?}"));
                    }
                }
            }
        })
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(broken.is_empty(), "{broken:?}");

    let rt = gc(GcMode::Off);
    let r = rt.run(&prog, &mut RandomScheduler::new(seed)).unwrap();
    let mut config = rt.initial_config(&prog);
    for (step, choice) in r.choices.iter().enumerate() {
        let Ok(events) = rt.advance(&mut config, choice, step) else {
            break;
        };
        for e in events {
            if let Some((var, _)) = e.op.access() {
                let writes = config.threads[&e.pid].knowledge.project_var(var).writes();
                let latest = last_write(&config, var).unwrap();
                prop_assert_eq!(writes.len(), 1);
                prop_assert!(writes.iter().all(|w| w.label == latest));
            }
        }
    }
    Ok(())
}

/// Offline collection never changes a verdict.
pub fn offline_gc_preserves_verdicts(prog_seed: u64, seed: u64) -> Result<(), TestCaseError> {
    let prog = program(prog_seed);
    let r = gc(GcMode::Off).run(&prog, &mut RandomScheduler::new(seed)).unwrap();
    let want = verdict_of(&r);
    for mode in [GcMode::Eager, GcMode::Every(1), GcMode::Every(2), GcMode::Every(5)] {
        prop_assert_eq!(verdict_on(&gc(mode), &prog, &r.choices), want.clone(), "{:?}", mode);
    }
    Ok(())
}

/// Collecting twice is collecting once, and collection only shrinks.
pub fn offline_gc_idempotent(prog_seed: u64, seed: u64) -> Result<(), TestCaseError> {
    let prog = program(prog_seed);
    let rt = gc(GcMode::Off);
    let mut broken = Vec::new();
    rt.run_observed(&prog, &mut RandomScheduler::new(seed), &mut |step, c| {
        for (pid, t) in &c.threads {
            let mut once = t.knowledge.clone();
            rt.detector.collect(&mut once, &c.records);
            let mut twice = once.clone();
            rt.detector.collect(&mut twice, &c.records);
            if once != twice || !once.is_subset(&t.knowledge) {
                broken.push(format!("step {step}: {pid}"));
            }
        }
    })
    .unwrap();
    prop_assert!(broken.is_empty(), "{broken:?}");
    Ok(())
}

pub fn arb_vc() -> impl Strategy<Value = VectorClock> {
    prop::collection::vec((0u32..4, 0u64..6), 0..5).prop_map(|entries| {
        entries
            .into_iter()
            .map(|(p, c)| (Pid::root().child(p), c))
            .filter(|(_, c)| *c > 0)
            .collect()
    })
}

/// Join is the least upper bound of a partial order.
pub fn vc_lattice(a: VectorClock, b: VectorClock, c: VectorClock) -> Result<(), TestCaseError> {
    prop_assert!(a.le(&a));
    if a.le(&b) && b.le(&a) {
        prop_assert_eq!(&a, &b);
    }
    if a.le(&b) && b.le(&c) {
        prop_assert!(a.le(&c));
    }
    let ab = a.join(&b);
    prop_assert_eq!(&ab, &b.join(&a));
    prop_assert_eq!(ab.join(&c), a.join(&b.join(&c)));
    prop_assert_eq!(a.join(&a), a.clone());
    prop_assert!(a.le(&ab) && b.le(&ab));
    if a.le(&c) && b.le(&c) {
        prop_assert!(ab.le(&c));
    }
    prop_assert!(VectorClock::bottom().le(&a));
    Ok(())
}

pub fn arb_hb_set() -> impl Strategy<Value = HbSet> {
    let label = (
        0u32..3,
        0u32..4,
        any::<bool>(),
        prop::sample::select(vec!["x", "y", "z"]),
    )
        .prop_map(|(p, seq, read, var)| {
            let label = Label {
                issuer: Pid::root().child(p),
                seq,
            };
            if read {
                AccessLabel::read(label, var.into())
            } else {
                AccessLabel::write(label, var.into())
            }
        });
    prop::collection::vec(label, 0..12).prop_map(|v| v.into_iter().collect())
}

/// Variable and access-kind projections commute, distribute over union,
/// and partition a set.
pub fn projection_algebra(a: HbSet, b: HbSet, var: &str) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.project_var(var).reads(), a.reads().project_var(var));
    prop_assert_eq!(a.project_var(var).writes(), a.writes().project_var(var));
    prop_assert_eq!(
        a.union(&b).project_var(var),
        a.project_var(var).union(&b.project_var(var))
    );
    prop_assert_eq!(a.union(&b).reads(), a.reads().union(&b.reads()));
    prop_assert_eq!(a.reads().union(&a.writes()), a.clone());
    prop_assert!(a.reads().difference(&a.writes()) == a.reads());
    prop_assert_eq!(a.project_var(var).project_var(var), a.project_var(var));
    Ok(())
}
