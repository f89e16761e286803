//! Operational independence and the search for manifest races.
//!
//! Two steps are independent at a configuration when both orders are
//! possible, reach the same configuration, and each step emits the same
//! events either way. The last condition keeps channel sequence numbers
//! fixed, so two sends competing for one channel never commute even when
//! they carry equal values. Configurations are compared without detector
//! state: fresh names are per thread, so structural equality needs no
//! renaming.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use crate::detector::{AccessKind, Undecorated};
use crate::names::{Name, Pid};
use crate::runtime::{ConfigOf, Op, Runtime, StepChoice};
use crate::syntax::Program;

type Plain = ConfigOf<Undecorated>;

/// Two adjacent conflicting steps by different threads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ManifestWitness {
    /// A schedule in the commutation class of the input.
    pub choices: Vec<StepChoice>,
    /// The conflicting steps are `choices[index]` and `choices[index + 1]`,
    /// or `choices[index]` and `simultaneous` when both are enabled at once.
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simultaneous: Option<StepChoice>,
    pub var: Name,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "camelCase")]
pub enum ManifestResult {
    Found(ManifestWitness),
    /// The whole commutation class was searched.
    None {
        class_size: usize,
    },
    /// The visited-set cap was hit first.
    Inconclusive {
        visited: usize,
    },
}

/// Whether `a` and `b` commute at `config`. `a` must be enabled there.
pub fn independent(rt: &Runtime<Undecorated>, config: &Plain, a: &StepChoice, b: &StepChoice) -> bool {
    if a.pid == b.pid || a == b {
        return false;
    }
    let Some((ab, ea, eb)) = both(rt, config, a, b) else {
        return false;
    };
    let Some((ba, eb2, ea2)) = both(rt, config, b, a) else {
        return false;
    };
    ab == ba && ea == ea2 && eb == eb2
}

type Events = Vec<(Pid, Op)>;

fn both(rt: &Runtime<Undecorated>, config: &Plain, x: &StepChoice, y: &StepChoice) -> Option<(Plain, Events, Events)> {
    let mut c = config.clone();
    if !rt.enabled_steps(&c).contains(x) {
        return None;
    }
    let ex = rt.step(&mut c, x).ok()?;
    if !rt.enabled_steps(&c).contains(y) {
        return None;
    }
    let ey = rt.step(&mut c, y).ok()?;
    Some((c, ex, ey))
}

/// Configurations before each step and the events of each step.
struct Replay {
    configs: Vec<Plain>,
    events: Vec<Events>,
}

fn replay(rt: &Runtime<Undecorated>, program: &Program, choices: &[StepChoice]) -> Option<Replay> {
    let mut config = rt.initial_config(program);
    let mut configs = Vec::with_capacity(choices.len() + 1);
    let mut events = Vec::with_capacity(choices.len());
    for choice in choices {
        if !rt.enabled_steps(&config).contains(choice) {
            return None;
        }
        configs.push(config.clone());
        match rt.step(&mut config, choice) {
            Ok(e) => events.push(e),
            // A panicking step ends the schedule; it has no successor.
            Err(_) => {
                events.push(Vec::new());
                configs.push(config.clone());
                return Some(Replay { configs, events });
            }
        }
    }
    configs.push(config);
    Some(Replay { configs, events })
}

fn access(events: &Events) -> Option<(&Name, AccessKind)> {
    events.first().and_then(|(_, op)| op.access())
}

fn conflict(a: Option<(&Name, AccessKind)>, b: Option<(&Name, AccessKind)>) -> Option<Name> {
    let ((va, ka), (vb, kb)) = (a?, b?);
    (va == vb && (ka == AccessKind::Write || kb == AccessKind::Write)).then(|| va.clone())
}

fn witness(rt: &Runtime<Undecorated>, choices: &[StepChoice], r: &Replay) -> Option<ManifestWitness> {
    for i in 0..r.events.len() {
        let here = access(&r.events[i]);
        if here.is_none() {
            continue;
        }
        if i + 1 < r.events.len() && choices[i].pid != choices[i + 1].pid {
            if let Some(var) = conflict(here, access(&r.events[i + 1])) {
                return Some(ManifestWitness {
                    choices: choices.to_vec(),
                    index: i,
                    simultaneous: None,
                    var,
                });
            }
        }
        for other in rt.enabled_steps(&r.configs[i]) {
            if other.pid == choices[i].pid {
                continue;
            }
            let mut c = r.configs[i].clone();
            let Ok(events) = rt.step(&mut c, &other) else {
                continue;
            };
            if let Some(var) = conflict(here, access(&events)) {
                return Some(ManifestWitness {
                    choices: choices.to_vec(),
                    index: i,
                    simultaneous: Some(other),
                    var,
                });
            }
        }
    }
    None
}

/// Schedules reachable from `choices` by swapping adjacent independent
/// steps, breadth first. `Err(visited)` when more than `cap` are found.
pub fn commutation_class(program: &Program, choices: &[StepChoice], cap: usize) -> Result<Vec<Vec<StepChoice>>, usize> {
    let mut out = Vec::new();
    let result = search(program, choices, cap, &mut |seq, _, _| {
        out.push(seq.to_vec());
        None
    });
    match result {
        ManifestResult::Inconclusive { visited } => Err(visited),
        _ => Ok(out),
    }
}

/// Looks for a manifest race in the commutation class of `choices`: two
/// conflicting accesses by different threads that are adjacent, or enabled
/// at the same configuration.
pub fn find_manifest(program: &Program, choices: &[StepChoice], cap: usize) -> ManifestResult {
    search(program, choices, cap, &mut |seq, rt, r| witness(rt, seq, r))
}

/// Looks at one schedule of the class; `Some` ends the search.
type Visit<'a> = dyn FnMut(&[StepChoice], &Runtime<Undecorated>, &Replay) -> Option<ManifestWitness> + 'a;

fn search(program: &Program, choices: &[StepChoice], cap: usize, check: &mut Visit<'_>) -> ManifestResult {
    let rt = Runtime::new(Undecorated);
    let mut visited: HashSet<Vec<StepChoice>> = HashSet::from([choices.to_vec()]);
    let mut queue = VecDeque::from([choices.to_vec()]);
    while let Some(seq) = queue.pop_front() {
        let Some(r) = replay(&rt, program, &seq) else {
            continue;
        };
        if let Some(w) = check(&seq, &rt, &r) {
            return ManifestResult::Found(w);
        }
        for i in 0..r.events.len().saturating_sub(1) {
            if !independent(&rt, &r.configs[i], &seq[i], &seq[i + 1]) {
                continue;
            }
            let mut next = seq.clone();
            next.swap(i, i + 1);
            if visited.insert(next.clone()) {
                if visited.len() > cap {
                    return ManifestResult::Inconclusive { visited: visited.len() };
                }
                queue.push_back(next);
            }
        }
    }
    ManifestResult::None {
        class_size: visited.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::runtime::Rule;
    use crate::syntax::parse;

    fn p(path: &[u32]) -> Pid {
        path.iter().fold(Pid::root(), |acc, k| acc.child(*k))
    }

    fn find(config: &Plain, rt: &Runtime<Undecorated>, pid: &Pid, rule: Rule) -> StepChoice {
        rt.enabled_steps(config)
            .into_iter()
            .find(|c| &c.pid == pid && c.rule == rule)
            .unwrap()
    }

    fn after(rt: &Runtime<Undecorated>, src: &str, steps: &[(Pid, Rule)]) -> Plain {
        let prog = parse(src).unwrap();
        let mut c = rt.initial_config(&prog);
        for (pid, rule) in steps {
            let ch = find(&c, rt, pid, *rule);
            rt.step(&mut c, &ch).unwrap();
        }
        c
    }

    #[test]
    fn reads_by_different_threads_commute() {
        let rt = Runtime::new(Undecorated);
        let src = "var z = 0; main { go { load z }; load z }";
        let c = after(&rt, src, &[(Pid::root(), Rule::Go)]);
        let a = find(&c, &rt, &Pid::root(), Rule::Read);
        let b = find(&c, &rt, &p(&[1]), Rule::Read);
        assert!(independent(&rt, &c, &a, &b));
    }

    #[test]
    fn competing_receives_are_dependent() {
        let rt = Runtime::new(Undecorated);
        let src = "main { let c = make(chan, 2) in c <- 1; c <- 1; go { <- c }; go { <- c }; stop }";
        let root = Pid::root();
        let c = after(
            &rt,
            src,
            &[
                (root.clone(), Rule::Make),
                (root.clone(), Rule::Send),
                (root.clone(), Rule::Send),
                (root.clone(), Rule::Go),
                (root.clone(), Rule::Go),
            ],
        );
        let a = find(&c, &rt, &p(&[1]), Rule::Recv);
        let b = find(&c, &rt, &p(&[2]), Rule::Recv);
        assert!(!independent(&rt, &c, &a, &b));
    }

    #[test]
    fn disjoint_steps_commute() {
        let rt = Runtime::new(Undecorated);
        let src = "var x = 0; var y = 0; main { let c = make(chan, 1) in go { x := 1 }; c <- 1; y := 2 }";
        let root = Pid::root();
        let c = after(&rt, src, &[(root.clone(), Rule::Make), (root.clone(), Rule::Go)]);
        let a = find(&c, &rt, &p(&[1]), Rule::Write);
        let b = find(&c, &rt, &root, Rule::Send);
        assert!(independent(&rt, &c, &a, &b));
    }

    #[test]
    fn listing1_racy_run_has_witness() {
        let prog = corpus::program("listing1");
        let rt = Runtime::new(Undecorated);
        let r = rt.replay(&prog, &[0, 1, 0]).unwrap();
        assert!(matches!(
            find_manifest(&prog, &r.choices, 1000),
            ManifestResult::Found(_)
        ));
    }

    #[test]
    fn sequential_program_has_no_manifest_race() {
        let prog = parse("var z = 0; main { z := 1; load z }").unwrap();
        let rt = Runtime::new(Undecorated);
        let r = rt.replay(&prog, &[0, 0]).unwrap();
        assert_eq!(
            find_manifest(&prog, &r.choices, 1000),
            ManifestResult::None { class_size: 1 }
        );
    }

    #[test]
    fn cap_is_reported_as_inconclusive() {
        let src =
            "var a = 0; var b = 0; var d = 0; main { go { a := 1; a := 2 }; go { b := 1; b := 2 }; d := 1; d := 2 }";
        let prog = parse(src).unwrap();
        let rt = Runtime::new(Undecorated);
        let r = rt.run(&prog, &mut crate::runtime::PrefixScheduler::default()).unwrap();
        assert!(matches!(
            commutation_class(&prog, &r.choices, 5),
            Err(v) if v > 5
        ));
        assert!(commutation_class(&prog, &r.choices, 10_000).unwrap().len() > 5);
    }
}
