use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus;
use crate::detector::{DetectorKind, DetectorOptions, Undecorated};
use crate::gen::random_program;
use crate::runtime::{ChoiceScheduler, RandomScheduler};
use crate::with_detector;

/// What the oracle says a detector should answer on a full trace: the first
/// step whose access completes an unordered conflicting pair, with the
/// variable and the kinds of all such pairs.
fn expected(trace: &[crate::runtime::Event]) -> Option<(usize, Name, BTreeSet<RaceKind>)> {
    let order = build_hb_order(trace).expect("runtime traces are well formed");
    let races = classify_races(&order);
    let first = races.iter().map(|r| r.later).min()?;
    let kinds = races.iter().filter(|r| r.later == first).map(|r| r.kind).collect();
    Some((
        trace[first].step,
        races.iter().find(|r| r.later == first)?.var.clone(),
        kinds,
    ))
}

const CHECKED: [DetectorKind; 4] = [
    DetectorKind::War,
    DetectorKind::Gc,
    DetectorKind::VcDjit,
    DetectorKind::VcFastTrack,
];

fn check_against_oracle(program: &Program, result: &RunResultOf<Undecorated>) -> Result<(), String> {
    let want = expected(&result.trace);
    for kind in CHECKED {
        let got = with_detector!(kind, DetectorOptions::default(), |d| verdict_on(
            &Runtime::new(d),
            program,
            &result.choices
        ));
        match (&want, &got) {
            (None, Verdict::Clean { .. }) => {}
            (
                Some((step, var, kinds)),
                Verdict::Race {
                    step: s,
                    kind: k,
                    var: v,
                },
            ) if step == s && var == v && kinds.contains(k) => {}
            _ => {
                return Err(format!(
                    "{kind}: oracle {want:?}, detector {got:?}, choices {:?}",
                    result.indices
                ))
            }
        }
    }
    Ok(())
}

#[test]
fn oracle_agrees_with_detectors_on_every_corpus_schedule() {
    for (name, _) in corpus::CORPUS {
        let program = corpus::program(name);
        let rt = Runtime::new(Undecorated);
        let mut failures = Vec::new();
        let summary = explore(&rt, &program, ExploreOptions::default(), &mut |r| {
            assert!(r.choices.len() <= 20, "{name}: schedule longer than 20 steps");
            if let Err(e) = check_against_oracle(&program, r) {
                failures.push(e);
            }
        });
        assert!(!summary.truncated);
        assert!(failures.is_empty(), "{name}: {failures:#?}");
    }
}

#[test]
fn flagged_races_appear_in_the_oracle() {
    for (name, _) in corpus::CORPUS {
        let program = corpus::program(name);
        for kind in DetectorKind::ALL {
            with_detector!(kind, DetectorOptions::default(), |d| {
                explore(&Runtime::new(d), &program, ExploreOptions::default(), &mut |r| {
                    let Outcome::Race(report) = &r.outcome else { return };
                    let order = build_hb_order(&r.trace).unwrap();
                    let last = r.trace.len() - 1;
                    assert!(
                        classify_races(&order)
                            .iter()
                            .any(|p| p.later == last && p.var == report.var && p.kind == report.kind),
                        "{name} {kind}: {report:?}"
                    );
                });
            })
        }
    }
}

#[test]
fn listing1_summary() {
    let program = corpus::program("listing1");
    let war = with_detector!(DetectorKind::War, DetectorOptions::default(), |d| summarize(
        &Runtime::new(d),
        &program,
        ExploreOptions::default()
    ));
    assert_eq!((war.schedules, war.flagged), (2, 2));
    assert_eq!((war.by_kind.raw, war.by_kind.war), (1, 1));
    let aw = with_detector!(DetectorKind::Aw, DetectorOptions::default(), |d| summarize(
        &Runtime::new(d),
        &program,
        ExploreOptions::default()
    ));
    assert_eq!((aw.schedules, aw.flagged, aw.by_kind.raw), (2, 1, 1));
}

#[test]
fn mutex_has_two_final_values() {
    let s = summarize(
        &Runtime::new(Undecorated),
        &corpus::program("mutex"),
        ExploreOptions::default(),
    );
    assert_eq!(
        s.final_values("z"),
        BTreeSet::from([crate::syntax::Value::Int(17), crate::syntax::Value::Int(42)])
    );
}

#[test]
fn schedule_cap_truncates() {
    let program = corpus::program("producer-consumer");
    let rt = Runtime::new(Undecorated);
    let s = summarize(
        &rt,
        &program,
        ExploreOptions {
            max_schedules: 10,
            ..ExploreOptions::default()
        },
    );
    assert_eq!(s.schedules, 10);
    assert!(s.truncated);
    let full = summarize(&rt, &program, ExploreOptions::default());
    assert!(!full.truncated);
}

#[test]
fn pruning_keeps_finals_and_verdicts() {
    for (name, _) in corpus::CORPUS {
        let program = corpus::program(name);
        with_detector!(DetectorKind::Gc, DetectorOptions::default(), |d| {
            let rt = Runtime::new(d);
            let full = summarize(&rt, &program, ExploreOptions::default());
            let pruned = summarize(
                &rt,
                &program,
                ExploreOptions {
                    prune_duplicates: true,
                    ..ExploreOptions::default()
                },
            );
            assert!(pruned.schedules <= full.schedules, "{name}");
            assert_eq!(pruned.finals, full.finals, "{name}");
            assert_eq!(pruned.any_race(), full.any_race(), "{name}");
        })
    }
}

#[test]
fn every_random_run_is_an_explored_schedule() {
    let program = corpus::program("closed-channel-eot");
    let rt = Runtime::new(Undecorated);
    let mut leaves = BTreeSet::new();
    explore(&rt, &program, ExploreOptions::default(), &mut |r| {
        leaves.insert(r.indices.clone());
    });
    for seed in 0..50 {
        let r = rt.run(&program, &mut RandomScheduler::new(seed)).unwrap();
        assert!(leaves.contains(&r.indices));
    }
}

#[test]
fn conditional_race_capacity_two_has_no_manifest_witness() {
    let program = corpus::program("conditional-race-k2");
    let rt = Runtime::new(Undecorated);
    let mut flagged = 0;
    with_detector!(DetectorKind::War, DetectorOptions::default(), |d| {
        explore(&Runtime::new(d), &program, ExploreOptions::default(), &mut |r| {
            if r.outcome.race().is_some() {
                flagged += 1;
                let result = find_manifest(&program, &r.choices, 100_000);
                assert!(matches!(result, ManifestResult::None { .. }), "{result:?}");
            }
        });
    });
    assert!(flagged > 0);
    let _ = rt;
}

#[test]
fn commutation_preserves_races() {
    for (name, _) in corpus::CORPUS {
        let program = corpus::program(name);
        let rt = Runtime::new(Undecorated);
        explore(&rt, &program, ExploreOptions::default(), &mut |r| {
            let racy = !classify_races(&build_hb_order(&r.trace).unwrap()).is_empty();
            let class = commutation_class(&program, &r.choices, 2_000).expect("small class");
            for other in class {
                let replayed = rt.run(&program, &mut ChoiceScheduler::new(other.clone())).unwrap();
                let order = build_hb_order(&replayed.trace).unwrap();
                assert_eq!(!classify_races(&order).is_empty(), racy, "{name}: {other:?}");
            }
        });
    }
}

fn arb_summary() -> impl Strategy<Value = Summary> {
    (0u64..50, 0u64..50, 0u64..5, any::<bool>(), 0i64..4).prop_map(|(s, f, p, t, v)| {
        let mut summary = Summary {
            schedules: s + f,
            flagged: f,
            truncated: t,
            panics: p,
            ..Summary::default()
        };
        summary.by_kind.raw = f;
        summary
            .finals
            .insert([("z".into(), crate::syntax::Value::Int(v))].into_iter().collect());
        summary
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn oracle_agrees_with_detectors_on_random_runs(prog_seed in any::<u64>(), seed in any::<u64>()) {
        let program = random_program(&mut ChaCha8Rng::seed_from_u64(prog_seed));
        let r = Runtime::new(Undecorated).run(&program, &mut RandomScheduler::new(seed)).unwrap();
        prop_assert!(check_against_oracle(&program, &r).is_ok(), "{}", check_against_oracle(&program, &r).unwrap_err());
    }

    #[test]
    fn summary_merge_is_associative_and_commutative(a in arb_summary(), b in arb_summary(), c in arb_summary()) {
        prop_assert_eq!(a.clone().merge(b.clone()).merge(c.clone()), a.clone().merge(b.clone().merge(c.clone())));
        prop_assert_eq!(a.clone().merge(b.clone()), b.merge(a));
    }
}
