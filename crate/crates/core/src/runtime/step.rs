use super::{
    Channel, ConfigOf, Event, Lock, Op, PanicReason, Partner, Rule, Runtime, SendKnowledge, StepChoice, Stop, Thread,
};
use crate::detector::{AccessKind, Detector, LabelSource, RaceReport, Violation};
use crate::names::{ChanId, Name, Pid};
use crate::syntax::{Expr, Guard, Term, Value};

#[derive(Clone, Copy)]
enum Comm<'a> {
    Send { chan: &'a Value, value: &'a Value },
    Recv { chan: &'a Value },
}

/// A communication the head term offers: a plain `let r = c <- v in t` or
/// `let r = <- c in t` (no branch), or one guard of a select.
#[derive(Clone, Copy)]
struct Offer<'a> {
    branch: Option<usize>,
    comm: Comm<'a>,
    binder: &'a Name,
    body: &'a Term,
}

impl Offer<'_> {
    fn chan(&self) -> &ChanId {
        let v = match self.comm {
            Comm::Send { chan, .. } | Comm::Recv { chan } => chan,
        };
        chan_id(v).expect("fault-free offers name channels")
    }
}

fn offers(term: &Term) -> Vec<Offer<'_>> {
    match term {
        Term::Let {
            binder,
            expr: Expr::Send { chan, value },
            body,
        } => vec![Offer {
            branch: None,
            comm: Comm::Send { chan, value },
            binder,
            body,
        }],
        Term::Let {
            binder,
            expr: Expr::Recv(chan),
            body,
        } => vec![Offer {
            branch: None,
            comm: Comm::Recv { chan },
            binder,
            body,
        }],
        Term::Select(branches) => branches
            .iter()
            .enumerate()
            .filter_map(|(i, b)| {
                let comm = match &b.guard {
                    Guard::Send { chan, value } => Comm::Send { chan, value },
                    Guard::Recv(chan) => Comm::Recv { chan },
                    Guard::Default => return None,
                };
                Some(Offer {
                    branch: Some(i),
                    comm,
                    binder: &b.binder,
                    body: &b.body,
                })
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn offer_at(term: &Term, branch: Option<usize>) -> Offer<'_> {
    offers(term)
        .into_iter()
        .find(|o| o.branch == branch)
        .expect("choice names an offered communication")
}

fn chan_id(v: &Value) -> Option<&ChanId> {
    match v {
        Value::Chan(c) => Some(c),
        _ => None,
    }
}

/// Panic raised by an ill-typed head term, if any.
fn fault(term: &Term) -> Option<PanicReason> {
    let not_chan = |v: &Value| chan_id(v).is_none().then(|| PanicReason::NotChannel(v.clone()));
    match term {
        // Well-typed conditions are reduced eagerly, so any `if` left at the
        // head is stuck.
        Term::If { cond, .. } => Some(PanicReason::NotBoolean(cond.clone())),
        Term::Let {
            expr: Expr::Send { chan, .. } | Expr::Recv(chan),
            ..
        } => not_chan(chan),
        Term::Close { chan, .. } => not_chan(chan),
        Term::Select(branches) => branches.iter().find_map(|b| match &b.guard {
            Guard::Send { chan, .. } | Guard::Recv(chan) => not_chan(chan),
            Guard::Default => None,
        }),
        _ => None,
    }
}

fn choice(pid: &Pid, rule: Rule, branch: Option<usize>) -> StepChoice {
    StepChoice {
        pid: pid.clone(),
        rule,
        branch,
        partner: None,
    }
}

fn race(pid: &Pid, var: &Name, access: AccessKind, v: Violation) -> Stop {
    let op = match access {
        AccessKind::Read => Op::Read {
            var: var.clone(),
            label: None,
        },
        AccessKind::Write => Op::Write {
            var: var.clone(),
            label: None,
        },
    };
    Stop::Race {
        report: RaceReport {
            kind: v.kind,
            var: var.clone(),
            pid: pid.clone(),
            access,
            conflicting: v.conflicting,
        },
        attempt: Event {
            step: 0,
            pid: pid.clone(),
            op,
        },
    }
}

impl<D: Detector> Runtime<D> {
    /// Every step whose rule premises hold, in a deterministic order: threads
    /// by pid, then select branches in source order. A rendezvous is listed
    /// once, under its sender. A default branch is listed only when no other
    /// branch of its select is.
    pub fn enabled_steps(&self, config: &ConfigOf<D>) -> Vec<StepChoice> {
        let mut out = Vec::new();
        for (pid, t) in &config.threads {
            if fault(&t.term).is_some() {
                out.push(choice(pid, Rule::Fault, None));
                continue;
            }
            match &t.term {
                Term::Let {
                    expr: Expr::Load(_), ..
                } => out.push(choice(pid, Rule::Read, None)),
                Term::Let {
                    expr: Expr::MakeChan(_),
                    ..
                } => out.push(choice(pid, Rule::Make, None)),
                Term::Store { .. } => out.push(choice(pid, Rule::Write, None)),
                Term::Go { .. } => out.push(choice(pid, Rule::Go, None)),
                Term::Close { .. } => out.push(choice(pid, Rule::Close, None)),
                Term::Acquire { lock, .. } => {
                    if matches!(config.locks.get(lock), Some(Lock::Released(_))) {
                        out.push(choice(pid, Rule::Acquire, None));
                    }
                }
                Term::Release { lock, .. } => {
                    if matches!(config.locks.get(lock), Some(Lock::Acquired)) {
                        out.push(choice(pid, Rule::Release, None));
                    }
                }
                term => {
                    let before = out.len();
                    for offer in offers(term) {
                        self.comm_choices(config, pid, offer, &mut out);
                    }
                    if let Term::Select(branches) = term {
                        if out.len() == before {
                            if let Some(i) = branches.iter().position(|b| b.guard == Guard::Default) {
                                out.push(choice(pid, Rule::Default, Some(i)));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn comm_choices(&self, config: &ConfigOf<D>, pid: &Pid, offer: Offer<'_>, out: &mut Vec<StepChoice>) {
        let id = offer.chan();
        let ch = &config.channels[id];
        match offer.comm {
            Comm::Send { .. } => {
                if ch.is_closed() {
                    // A plain send on a closed channel may fire, and panics;
                    // inside a select the guard is simply not enabled.
                    if offer.branch.is_none() {
                        out.push(choice(pid, Rule::Send, None));
                    }
                } else if ch.capacity > 0 {
                    if !ch.backward.is_empty() {
                        out.push(choice(pid, Rule::Send, offer.branch));
                    }
                } else {
                    for (q, tq) in &config.threads {
                        if q == pid || fault(&tq.term).is_some() {
                            continue;
                        }
                        for other in offers(&tq.term) {
                            if matches!(other.comm, Comm::Recv { .. }) && other.chan() == id {
                                out.push(StepChoice {
                                    pid: pid.clone(),
                                    rule: Rule::Rendezvous,
                                    branch: offer.branch,
                                    partner: Some(Partner {
                                        pid: q.clone(),
                                        branch: other.branch,
                                    }),
                                });
                            }
                        }
                    }
                }
            }
            Comm::Recv { .. } => {
                if !ch.forward.is_empty() {
                    out.push(choice(pid, Rule::Recv, offer.branch));
                } else if ch.is_closed() {
                    out.push(choice(pid, Rule::RecvEot, offer.branch));
                }
            }
        }
    }

    /// Applies one rule. `choice` must come from [`Runtime::enabled_steps`]
    /// on the same configuration; the step index of returned events is left
    /// to the caller.
    ///
    /// # Panics
    ///
    /// If `choice` is not enabled in `config`.
    pub fn step(&self, config: &mut ConfigOf<D>, choice: &StepChoice) -> Result<Vec<(Pid, Op)>, Stop> {
        let pid = &choice.pid;
        let d = &self.detector;
        let mut events = Vec::new();
        let mut touched = vec![pid.clone()];
        let mut synced = Vec::new();
        {
            let threads = &mut config.threads;
            let thread = threads.get_mut(pid).expect("choice names a live thread");
            let term = thread.term.clone();
            match choice.rule {
                Rule::Fault => {
                    return Err(Stop::Panic {
                        pid: pid.clone(),
                        reason: fault(&term).expect("faulty head"),
                    })
                }
                Rule::Read => {
                    let Term::Let {
                        binder,
                        expr: Expr::Load(var),
                        body,
                    } = term
                    else {
                        unreachable!("read choice on {term:?}")
                    };
                    let record = config.records.get_mut(&var).expect("declared variable");
                    let mut labels = LabelSource {
                        pid,
                        next: &mut thread.next_label,
                    };
                    let label = d
                        .read(&var, &mut thread.knowledge, record, &mut labels)
                        .map_err(|v| race(pid, &var, AccessKind::Read, v))?;
                    let value = config.memory[&var].clone();
                    thread.term = body.subst(&binder, &value);
                    events.push((pid.clone(), Op::Read { var, label }));
                }
                Rule::Write => {
                    let Term::Store { var, value, next } = term else {
                        unreachable!("write choice on {term:?}")
                    };
                    let record = config.records.get_mut(&var).expect("declared variable");
                    let mut labels = LabelSource {
                        pid,
                        next: &mut thread.next_label,
                    };
                    let label = d
                        .write(&var, &mut thread.knowledge, record, &mut labels)
                        .map_err(|v| race(pid, &var, AccessKind::Write, v))?;
                    config.memory.insert(var.clone(), value);
                    thread.term = *next;
                    events.push((pid.clone(), Op::Write { var, label }));
                }
                Rule::Make => {
                    let Term::Let {
                        binder,
                        expr: Expr::MakeChan(capacity),
                        body,
                    } = term
                    else {
                        unreachable!("make choice on {term:?}")
                    };
                    let chan = ChanId {
                        creator: pid.clone(),
                        index: thread.next_chan,
                    };
                    thread.next_chan += 1;
                    config.channels.insert(chan.clone(), Channel::new(capacity, d.empty()));
                    thread.term = body.subst(&binder, &Value::Chan(chan.clone()));
                    events.push((pid.clone(), Op::Make { chan, capacity }));
                }
                Rule::Go => {
                    let Term::Go { body, next } = term else {
                        unreachable!("go choice on {term:?}")
                    };
                    thread.spawned += 1;
                    let child = pid.child(thread.spawned);
                    let knowledge = d.spawn(pid, &mut thread.knowledge, &child);
                    thread.term = *next;
                    threads.insert(child.clone(), Thread::new(*body, knowledge));
                    events.push((pid.clone(), Op::Spawn { child: child.clone() }));
                    touched.push(child);
                }
                Rule::Close => {
                    let Term::Close { chan, next } = term else {
                        unreachable!("close choice on {term:?}")
                    };
                    let id = chan_id(&chan).expect("fault-free").clone();
                    let ch = config.channels.get_mut(&id).expect("live channel");
                    if ch.is_closed() {
                        return Err(Stop::Panic {
                            pid: pid.clone(),
                            reason: PanicReason::CloseOfClosed(id),
                        });
                    }
                    ch.eot = Some(d.publish(pid, &mut thread.knowledge));
                    thread.term = *next;
                    events.push((pid.clone(), Op::Close { chan: id }));
                }
                Rule::Acquire => {
                    let Term::Acquire { lock, next } = term else {
                        unreachable!("acquire choice on {term:?}")
                    };
                    let slot = config.locks.get_mut(&lock).expect("declared lock");
                    let Lock::Released(k) = std::mem::replace(slot, Lock::Acquired) else {
                        unreachable!("acquire of held lock")
                    };
                    d.learn(&mut thread.knowledge, &k);
                    thread.term = *next;
                    events.push((pid.clone(), Op::Acquire { lock }));
                    synced.push(pid.clone());
                }
                Rule::Release => {
                    let Term::Release { lock, next } = term else {
                        unreachable!("release choice on {term:?}")
                    };
                    let k = d.publish(pid, &mut thread.knowledge);
                    config.locks.insert(lock.clone(), Lock::Released(k));
                    thread.term = *next;
                    events.push((pid.clone(), Op::Release { lock }));
                }
                Rule::Send => {
                    let offer = offer_at(&term, choice.branch);
                    let Comm::Send { value, .. } = offer.comm else {
                        unreachable!("send choice on a receive")
                    };
                    let id = offer.chan().clone();
                    let ch = config.channels.get_mut(&id).expect("live channel");
                    if ch.is_closed() {
                        return Err(Stop::Panic {
                            pid: pid.clone(),
                            reason: PanicReason::SendOnClosed(id),
                        });
                    }
                    let ticket = ch.backward.pop_front().expect("free slot");
                    let k = &mut thread.knowledge;
                    let seq = ch.sent;
                    ch.sent += 1;
                    let deposit = (
                        pid.clone(),
                        Op::Send {
                            chan: id.clone(),
                            seq,
                            value: value.clone(),
                        },
                    );
                    let complete = (pid.clone(), Op::SendComplete { chan: id, seq });
                    let msg = match self.options.send_knowledge {
                        SendKnowledge::PreUnion => {
                            let msg = d.publish(pid, k);
                            d.learn(k, &ticket);
                            events.extend([deposit, complete]);
                            msg
                        }
                        SendKnowledge::PostUnion => {
                            d.learn(k, &ticket);
                            events.extend([complete, deposit]);
                            d.publish(pid, k)
                        }
                    };
                    ch.forward.push_back((value.clone(), msg));
                    thread.term = offer.body.subst(offer.binder, &Value::Unit);
                    synced.push(pid.clone());
                }
                Rule::Recv => {
                    let offer = offer_at(&term, choice.branch);
                    let id = offer.chan().clone();
                    let ch = config.channels.get_mut(&id).expect("live channel");
                    let (value, msg) = ch.forward.pop_front().expect("pending message");
                    ch.backward.push_back(d.publish(pid, &mut thread.knowledge));
                    d.learn(&mut thread.knowledge, &msg);
                    let seq = ch.received;
                    ch.received += 1;
                    thread.term = offer.body.subst(offer.binder, &value);
                    events.push((pid.clone(), Op::Recv { chan: id.clone(), seq }));
                    events.push((pid.clone(), Op::RecvComplete { chan: id, seq, value }));
                    synced.push(pid.clone());
                }
                Rule::RecvEot => {
                    let offer = offer_at(&term, choice.branch);
                    let id = offer.chan().clone();
                    let eot = config.channels[&id].eot.as_ref().expect("closed channel");
                    d.learn(&mut thread.knowledge, eot);
                    thread.term = offer.body.subst(offer.binder, &Value::Eot);
                    events.push((pid.clone(), Op::RecvEot { chan: id }));
                    synced.push(pid.clone());
                }
                Rule::Rendezvous => {
                    let partner = choice.partner.as_ref().expect("rendezvous partner");
                    let mut receiver = threads.remove(&partner.pid).expect("live partner");
                    let sender = threads.get_mut(pid).expect("live thread");
                    let offer = offer_at(&term, choice.branch);
                    let Comm::Send { value, .. } = offer.comm else {
                        unreachable!("rendezvous sender offers a receive")
                    };
                    let rterm = receiver.term.clone();
                    let roffer = offer_at(&rterm, partner.branch);
                    d.rendezvous((pid, &mut sender.knowledge), (&partner.pid, &mut receiver.knowledge));
                    sender.term = offer.body.subst(offer.binder, &Value::Unit);
                    receiver.term = roffer.body.subst(roffer.binder, value);
                    events.push((
                        pid.clone(),
                        Op::Rendezvous {
                            chan: offer.chan().clone(),
                            sender: pid.clone(),
                            receiver: partner.pid.clone(),
                            value: value.clone(),
                        },
                    ));
                    threads.insert(partner.pid.clone(), receiver);
                    touched.push(partner.pid.clone());
                    synced.extend([pid.clone(), partner.pid.clone()]);
                }
                Rule::Default => {
                    let Term::Select(branches) = &term else {
                        unreachable!("default choice on {term:?}")
                    };
                    let b = &branches[choice.branch.expect("default branch index")];
                    thread.term = b.body.subst(&b.binder, &Value::Unit);
                    events.push((pid.clone(), Op::Tau));
                }
            }
        }
        if d.gc_after_sync() {
            for p in &synced {
                self.collect(config, p);
            }
        }
        for p in &touched {
            events.extend(self.normalize(config, p));
        }
        Ok(events)
    }

    /// Applies local steps at the head of `pid`'s term until none applies.
    /// Each reduced `if` yields a silent event.
    pub(super) fn normalize(&self, config: &mut ConfigOf<D>, pid: &Pid) -> Vec<(Pid, Op)> {
        let mut events = Vec::new();
        let Some(thread) = config.threads.get_mut(pid) else {
            return events;
        };
        loop {
            let next = match &thread.term {
                Term::Let {
                    binder,
                    expr: Expr::Value(v),
                    body,
                } => body.subst(binder, v),
                Term::If {
                    cond,
                    equals,
                    then_branch,
                    else_branch,
                } => {
                    let taken = match (equals, cond) {
                        (Some(rhs), _) => cond == rhs,
                        (None, Value::Bool(b)) => *b,
                        (None, _) => break,
                    };
                    events.push((pid.clone(), Op::Tau));
                    if taken {
                        (**then_branch).clone()
                    } else {
                        (**else_branch).clone()
                    }
                }
                _ => break,
            };
            thread.term = next;
        }
        events
    }
}
