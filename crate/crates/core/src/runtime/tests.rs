use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus;
use crate::detector::{
    AccessKind, AccessLabel, DetectorOptions, HbSet, HbSetDetector, HbVariant, RaceKind, Undecorated,
};
use crate::gen::random_program;
use crate::names::Label;
use crate::syntax::parse;

fn war() -> Runtime<HbSetDetector> {
    Runtime::new(HbSetDetector::new(HbVariant::War, DetectorOptions::default()))
}

fn aw() -> Runtime<HbSetDetector> {
    Runtime::new(HbSetDetector::new(HbVariant::Aw, DetectorOptions::default()))
}

fn p(path: &[u32]) -> Pid {
    path.iter().fold(Pid::root(), |acc, k| acc.child(*k))
}

/// Applies the enabled step of `pid` with `rule`.
fn fire<D: Detector>(rt: &Runtime<D>, config: &mut ConfigOf<D>, pid: &Pid, rule: Rule) -> Vec<(Pid, Op)> {
    let enabled = rt.enabled_steps(config);
    let choice = enabled
        .iter()
        .find(|c| &c.pid == pid && c.rule == rule)
        .unwrap_or_else(|| panic!("{pid} {rule:?} not enabled in {enabled:?}"))
        .clone();
    rt.step(config, &choice)
        .unwrap_or_else(|s| panic!("{choice} stopped: {s:?}"))
}

fn try_fire<D: Detector>(
    rt: &Runtime<D>,
    config: &mut ConfigOf<D>,
    pid: &Pid,
    rule: Rule,
) -> Result<Vec<(Pid, Op)>, Stop> {
    let choice = rt
        .enabled_steps(config)
        .into_iter()
        .find(|c| &c.pid == pid && c.rule == rule)
        .expect("enabled");
    rt.step(config, &choice)
}

fn writes_on(hb: &HbSet, var: &str) -> usize {
    hb.project_var(var).writes().len()
}

#[test]
fn stop_terminates_without_steps() {
    let prog = parse("main { stop }").unwrap();
    let r = war().run(&prog, &mut RandomScheduler::new(0)).unwrap();
    assert_eq!(r.outcome, Outcome::Terminated);
    assert!(r.trace.is_empty());
    assert!(war().enabled_steps(&r.config).is_empty());
}

#[test]
fn initial_config_holds_initial_writes() {
    let prog = parse("var z = 1; var x = 2; lock l; main { stop }").unwrap();
    let rt = war();
    let c = rt.initial_config(&prog);
    let root = &c.threads[&Pid::root()];
    let expected: HbSet = [
        AccessLabel::write(
            Label {
                issuer: Pid::root(),
                seq: 0,
            },
            "z".into(),
        ),
        AccessLabel::write(
            Label {
                issuer: Pid::root(),
                seq: 1,
            },
            "x".into(),
        ),
    ]
    .into_iter()
    .collect();
    assert_eq!(root.knowledge, expected);
    assert_eq!(root.next_label, 2);
    assert_eq!(c.memory[&Name::from("z")], Value::Int(1));
    assert_eq!(c.locks[&Name::from("l")], Lock::Released(HbSet::new()));
    assert!(c.channels.is_empty());

    let empty = rt.initial_config(&parse("main { stop }").unwrap());
    assert!(empty.threads[&Pid::root()].knowledge.is_empty());
}

#[test]
fn message_passing_places_write_in_consumer_past() {
    let rt = war();
    let prog = corpus::program("message-passing");
    let mut c = rt.initial_config(&prog);
    assert_eq!(c.threads.len(), 1);
    assert!(c.channels.is_empty());
    let root = Pid::root();
    fire(&rt, &mut c, &root, Rule::Make);
    fire(&rt, &mut c, &root, Rule::Go);
    fire(&rt, &mut c, &root, Rule::Go);
    let (p1, p2) = (p(&[1]), p(&[2]));
    fire(&rt, &mut c, &p1, Rule::Write);
    fire(&rt, &mut c, &p1, Rule::Send);
    fire(&rt, &mut c, &p2, Rule::Recv);
    let writer_label = AccessLabel::write(
        Label {
            issuer: p1.clone(),
            seq: 0,
        },
        "z".into(),
    );
    assert!(c.threads[&p2].knowledge.contains(&writer_label));
    fire(&rt, &mut c, &p2, Rule::Read);
}

#[test]
fn mutex_backward_ticket_carries_previous_write() {
    let rt = war();
    let prog = corpus::program("mutex");
    let mut c = rt.initial_config(&prog);
    let root = Pid::root();
    fire(&rt, &mut c, &root, Rule::Make);
    fire(&rt, &mut c, &root, Rule::Go);
    fire(&rt, &mut c, &root, Rule::Go);
    let (p1, p2) = (p(&[1]), p(&[2]));
    fire(&rt, &mut c, &p1, Rule::Send);
    fire(&rt, &mut c, &p1, Rule::Write);
    fire(&rt, &mut c, &p1, Rule::Recv);
    let write = AccessLabel::write(Label { issuer: p1, seq: 0 }, "z".into());
    assert!(!c.threads[&p2].knowledge.contains(&write));
    fire(&rt, &mut c, &p2, Rule::Send);
    assert!(c.threads[&p2].knowledge.contains(&write));
}

#[test]
fn buffered_channel_occupancy() {
    let rt = war();
    let prog = parse("main { let c = make(chan, 1) in c <- 0; stop }").unwrap();
    let mut c = rt.initial_config(&prog);
    let root = Pid::root();
    fire(&rt, &mut c, &root, Rule::Make);
    let ch = c.channels.values().next().unwrap();
    assert_eq!((ch.forward.len(), ch.backward.len()), (0, 1));
    assert_eq!(ch.backward[0], HbSet::new());
    fire(&rt, &mut c, &root, Rule::Send);
    let ch = c.channels.values().next().unwrap();
    assert_eq!((ch.forward.len(), ch.backward.len()), (1, 0));
}

#[test]
fn blocked_receive_deadlocks() {
    let prog = parse("main { let c = make(chan, 1) in <- c }").unwrap();
    let r = war().run(&prog, &mut RandomScheduler::new(0)).unwrap();
    assert_eq!(r.outcome, Outcome::Deadlock);
    assert!(war().enabled_steps(&r.config).is_empty());
}

#[test]
fn listing1_races_in_both_orders() {
    let prog = corpus::program("listing1");
    // After the spawn: index 0 is main's read, index 1 the child's write; then the other.
    let read_first = war().replay(&prog, &[0, 0, 0]).unwrap();
    let write_first = war().replay(&prog, &[0, 1, 0]).unwrap();
    assert_eq!(read_first.outcome.race().map(|r| r.kind), Some(RaceKind::WaR));
    assert_eq!(write_first.outcome.race().map(|r| r.kind), Some(RaceKind::RaW));
    let report = write_first.outcome.race().unwrap();
    assert_eq!(report.access, AccessKind::Read);
    assert_eq!(report.pid, Pid::root());

    assert_eq!(aw().replay(&prog, &[0, 0, 0]).unwrap().outcome, Outcome::Terminated);
    assert_eq!(
        aw().replay(&prog, &[0, 1, 0]).unwrap().outcome.race().map(|r| r.kind),
        Some(RaceKind::RaW)
    );
}

#[test]
fn listing1_aw_write_first_conflicting_set() {
    let prog = corpus::program("listing1");
    let r = aw().replay(&prog, &[0, 1, 0]).unwrap();
    let report = r.outcome.race().unwrap();
    let child_write = AccessLabel::write(
        Label {
            issuer: p(&[1]),
            seq: 0,
        },
        "a".into(),
    );
    assert_eq!(report.conflicting, vec![crate::detector::Conflict::Event(child_write)]);
}

/// p0 sends 0, p0.1 writes and receives, p0 sends 1, p0.2 receives and reads.
fn conditional_k1_schedule<D: Detector>(rt: &Runtime<D>) -> Result<(), Stop> {
    let prog = corpus::program("conditional-race-k1");
    let mut c = rt.initial_config(&prog);
    let root = Pid::root();
    let (p1, p2) = (p(&[1]), p(&[2]));
    fire(rt, &mut c, &root, Rule::Make);
    fire(rt, &mut c, &root, Rule::Go);
    fire(rt, &mut c, &root, Rule::Go);
    fire(rt, &mut c, &root, Rule::Send);
    fire(rt, &mut c, &p1, Rule::Write);
    fire(rt, &mut c, &p1, Rule::Recv);
    fire(rt, &mut c, &root, Rule::Send);
    fire(rt, &mut c, &p2, Rule::Recv);
    try_fire(rt, &mut c, &p2, Rule::Read).map(|_| ())
}

#[test]
fn send_knowledge_choice_decides_capacity_one_conditional_race() {
    let pre = war();
    let stop = conditional_k1_schedule(&pre).unwrap_err();
    let Stop::Race { report, .. } = stop else {
        panic!("{stop:?}")
    };
    assert_eq!(report.kind, RaceKind::RaW);

    let post = Runtime::with_options(
        HbSetDetector::new(HbVariant::War, DetectorOptions::default()),
        RunOptions {
            send_knowledge: SendKnowledge::PostUnion,
            ..RunOptions::default()
        },
    );
    assert!(conditional_k1_schedule(&post).is_ok());
}

#[test]
fn panics() {
    let cases = [
        ("main { let c = make(chan, 1) in close(c); c <- 1 }", "send on closed"),
        (
            "main { let c = make(chan, 1) in close(c); close(c) }",
            "close of closed",
        ),
        ("main { if 3 then { stop } else { stop } }", "not a boolean"),
        ("main { let c = 5 in <- c }", "not a channel"),
    ];
    for (src, needle) in cases {
        let r = war().run(&parse(src).unwrap(), &mut RandomScheduler::new(0)).unwrap();
        let Outcome::Panic { reason, .. } = &r.outcome else {
            panic!("{src}: {:?}", r.outcome)
        };
        assert!(reason.to_string().contains(needle), "{src}: {reason}");
    }
}

#[test]
fn select_send_on_closed_is_disabled_not_panicking() {
    let src = "main { let c = make(chan, 1) in close(c); select { case c <- 1 => stop case default => stop } }";
    let r = war().run(&parse(src).unwrap(), &mut RandomScheduler::new(0)).unwrap();
    assert_eq!(r.outcome, Outcome::Terminated);
    assert_eq!(r.choices.last().unwrap().rule, Rule::Default);
}

#[test]
fn default_only_when_nothing_else_is_enabled() {
    let src = "main { let c = make(chan, 1) in c <- 1; select { case <- c => stop case default => stop } }";
    let rt = war();
    let prog = parse(src).unwrap();
    let mut c = rt.initial_config(&prog);
    fire(&rt, &mut c, &Pid::root(), Rule::Make);
    fire(&rt, &mut c, &Pid::root(), Rule::Send);
    let enabled = rt.enabled_steps(&c);
    assert_eq!(enabled.len(), 1);
    assert_eq!(enabled[0].rule, Rule::Recv);
    assert_eq!(enabled[0].branch, Some(0));
}

#[test]
fn rendezvous_merges_both_sides() {
    let src = "var x = 0; var y = 0; main { let c = make(chan, 0) in go { x := 1; <- c }; y := 1; c <- 0 }";
    let rt = war();
    let mut c = rt.initial_config(&parse(src).unwrap());
    let root = Pid::root();
    fire(&rt, &mut c, &root, Rule::Make);
    fire(&rt, &mut c, &root, Rule::Go);
    fire(&rt, &mut c, &p(&[1]), Rule::Write);
    fire(&rt, &mut c, &root, Rule::Write);
    let events = fire(&rt, &mut c, &root, Rule::Rendezvous);
    assert!(matches!(&events[0].1, Op::Rendezvous { receiver, .. } if *receiver == p(&[1])));
    assert_eq!(c.threads[&root].knowledge, c.threads[&p(&[1])].knowledge);
    assert_eq!(writes_on(&c.threads[&root].knowledge, "x"), 2);
    assert!(c
        .channels
        .values()
        .all(|ch| ch.forward.is_empty() && ch.backward.is_empty()));
}

#[test]
fn eot_is_not_dequeued() {
    let src = "main { let c = make(chan, 0) in close(c); <- c; let r = <- c in if r == 1 then { stop } else { stop } }";
    let rt = Runtime::new(Undecorated);
    let r = rt.run(&parse(src).unwrap(), &mut RandomScheduler::new(0)).unwrap();
    assert_eq!(r.outcome, Outcome::Terminated);
    let eots = r.trace.iter().filter(|e| matches!(e.op, Op::RecvEot { .. })).count();
    assert_eq!(eots, 2);
}

#[test]
fn buffered_messages_drain_before_eot() {
    let src = "main { let c = make(chan, 2) in c <- 7; close(c); let a = <- c in let b = <- c in if a == 7 then { if b == 1 then { stop } else { stop } } else { stop } }";
    let r = war().run(&parse(src).unwrap(), &mut RandomScheduler::new(0)).unwrap();
    assert_eq!(r.outcome, Outcome::Terminated);
    let ops: Vec<_> = r.trace.iter().map(|e| &e.op).collect();
    assert!(matches!(ops[ops.len() - 3], Op::RecvEot { .. }), "{ops:?}");
}

#[test]
fn locks_block_and_double_release_deadlocks() {
    let rt = war();
    let mut c = rt.initial_config(&corpus::program("lock-critical-section"));
    let root = Pid::root();
    fire(&rt, &mut c, &root, Rule::Go);
    fire(&rt, &mut c, &root, Rule::Go);
    fire(&rt, &mut c, &p(&[1]), Rule::Acquire);
    assert!(!rt.enabled_steps(&c).iter().any(|s| s.rule == Rule::Acquire));

    let prog = parse("lock l; main { acquire(l); release(l); release(l) }").unwrap();
    let r = rt.run(&prog, &mut RandomScheduler::new(0)).unwrap();
    assert_eq!(r.outcome, Outcome::Deadlock);
}

#[test]
fn step_budget() {
    let prog = corpus::program("producer-consumer");
    let rt = Runtime::with_options(
        HbSetDetector::new(HbVariant::War, DetectorOptions::default()),
        RunOptions {
            max_steps: 3,
            ..RunOptions::default()
        },
    );
    let r = rt.run(&prog, &mut RandomScheduler::new(1)).unwrap();
    assert_eq!(r.outcome, Outcome::StepBudgetExceeded);
    assert_eq!(r.choices.len(), 3);
}

#[test]
fn scripted_errors_surface() {
    let prog = corpus::program("listing1");
    assert!(matches!(
        war().replay(&prog, &[0]),
        Err(ScheduleError::Exhausted { step: 1, .. })
    ));
    assert!(matches!(
        war().replay(&prog, &[5]),
        Err(ScheduleError::OutOfRange { .. })
    ));
}

/// Checks every invariant that can be read off one run.
fn check_run(rt: &Runtime<HbSetDetector>, prog: &Program, seed: u64) -> Result<(), TestCaseError> {
    let mut failures = Vec::new();
    let r = rt
        .run_observed(prog, &mut RandomScheduler::new(seed), &mut |step, c| {
            for (id, ch) in &c.channels {
                if ch.capacity == 0 {
                    if !ch.forward.is_empty() || !ch.backward.is_empty() {
                        failures.push(format!("step {step}: unbuffered {id} holds entries"));
                    }
                } else if !ch.is_closed() && ch.forward.len() + ch.backward.len() != ch.capacity as usize {
                    failures.push(format!("step {step}: occupancy of {id} broken"));
                }
            }
        })
        .unwrap();
    prop_assert!(failures.is_empty(), "{failures:?}");

    // Freshness.
    let mut labels = BTreeSet::new();
    let mut pids = BTreeSet::from([Pid::root()]);
    let mut chans = BTreeSet::new();
    for e in &r.trace {
        match &e.op {
            Op::Read { label: Some(l), .. } | Op::Write { label: Some(l), .. } => {
                prop_assert!(labels.insert(l.clone()), "label {l} issued twice")
            }
            Op::Spawn { child } => prop_assert!(pids.insert(child.clone()), "pid {child} issued twice"),
            Op::Make { chan, .. } => prop_assert!(chans.insert(chan.clone()), "channel {chan} issued twice"),
            _ => {}
        }
    }

    // FIFO: the i-th receive completion carries the i-th sent value.
    for e in &r.trace {
        if let Op::RecvComplete { chan, seq, value } = &e.op {
            let sent = r.trace.iter().find_map(|s| match &s.op {
                Op::Send {
                    chan: c,
                    seq: q,
                    value: v,
                } if c == chan && q == seq => Some(v),
                _ => None,
            });
            prop_assert_eq!(sent, Some(value));
        }
    }

    // Unbuffered channels step only by rendezvous or EOT receipt.
    let unbuffered: BTreeSet<_> = r
        .trace
        .iter()
        .filter_map(|e| match &e.op {
            Op::Make { chan, capacity: 0 } => Some(chan.clone()),
            _ => None,
        })
        .collect();
    for e in &r.trace {
        if let Op::Send { chan, .. } | Op::Recv { chan, .. } = &e.op {
            prop_assert!(!unbuffered.contains(chan));
        }
    }

    // Determinism.
    let again = rt.replay(prog, &r.indices).unwrap();
    prop_assert_eq!(&again.trace, &r.trace);
    prop_assert_eq!(&again.outcome, &r.outcome);
    prop_assert_eq!(&again.config, &r.config);
    Ok(())
}

/// Spawn inheritance and rendezvous symmetry, checked step by step.
fn check_sync_steps(prog: &Program, seed: u64) -> Result<(), TestCaseError> {
    let rt = war();
    let mut c = rt.initial_config(prog);
    let mut sched = RandomScheduler::new(seed);
    for step in 0..200 {
        let enabled = rt.enabled_steps(&c);
        if enabled.is_empty() {
            break;
        }
        let choice = enabled[sched.choose(step, &enabled).unwrap()].clone();
        let before = c.clone();
        match rt.step(&mut c, &choice) {
            Ok(events) => {
                if choice.rule == Rule::Go {
                    let Some(Op::Spawn { child }) = events.first().map(|e| &e.1) else {
                        return Err(TestCaseError::fail("go without spawn event"));
                    };
                    prop_assert_eq!(&c.threads[child].knowledge, &before.threads[&choice.pid].knowledge);
                    prop_assert_eq!(&c.threads[child].knowledge, &c.threads[&choice.pid].knowledge);
                }
                if choice.rule == Rule::Rendezvous {
                    let partner = &choice.partner.as_ref().unwrap().pid;
                    prop_assert_eq!(&c.threads[partner].knowledge, &c.threads[&choice.pid].knowledge);
                }
            }
            Err(_) => break,
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn runtime_invariants_on_random_programs(prog_seed in any::<u64>(), sched_seed in any::<u64>()) {
        let prog = random_program(&mut ChaCha8Rng::seed_from_u64(prog_seed));
        check_run(&war(), &prog, sched_seed)?;
        check_sync_steps(&prog, sched_seed)?;
    }

    #[test]
    fn runtime_invariants_on_corpus(index in 0..corpus::CORPUS.len(), seed in any::<u64>()) {
        let prog = corpus::program(corpus::CORPUS[index].0);
        check_run(&war(), &prog, seed)?;
        check_sync_steps(&prog, seed)?;
    }
}
