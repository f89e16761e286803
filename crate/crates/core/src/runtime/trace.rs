use std::fmt;

use serde::{Deserialize, Serialize};

use crate::names::{ChanId, Label, Name, Pid};
use crate::syntax::Value;

/// One entry of the linear execution history.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    /// Index of the scheduler step that produced the event.
    pub step: usize,
    pub pid: Pid,
    #[serde(flatten)]
    pub op: Op,
}

/// Channel sequence numbers count sends and receives separately from zero.
///
/// A buffered send produces `Send` (the message deposit) and `SendComplete`
/// (consumption of a free-slot ticket); a buffered receive produces `Recv`
/// (the ticket deposit) and `RecvComplete` (the message take). Their relative
/// order within one step records which knowledge travels with the deposit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum Op {
    Write {
        var: Name,
        label: Option<Label>,
    },
    Read {
        var: Name,
        label: Option<Label>,
    },
    Make {
        chan: ChanId,
        capacity: u32,
    },
    Send {
        chan: ChanId,
        seq: u32,
        value: Value,
    },
    SendComplete {
        chan: ChanId,
        seq: u32,
    },
    Recv {
        chan: ChanId,
        seq: u32,
    },
    RecvComplete {
        chan: ChanId,
        seq: u32,
        value: Value,
    },
    Rendezvous {
        chan: ChanId,
        sender: Pid,
        receiver: Pid,
        value: Value,
    },
    Close {
        chan: ChanId,
    },
    RecvEot {
        chan: ChanId,
    },
    Spawn {
        child: Pid,
    },
    Acquire {
        lock: Name,
    },
    Release {
        lock: Name,
    },
    Tau,
}

impl Op {
    /// Variable and access kind of a memory event.
    pub fn access(&self) -> Option<(&Name, crate::detector::AccessKind)> {
        use crate::detector::AccessKind;
        match self {
            Op::Write { var, .. } => Some((var, AccessKind::Write)),
            Op::Read { var, .. } => Some((var, AccessKind::Read)),
            _ => None,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.pid)?;
        match &self.op {
            Op::Write { var, .. } => write!(f, "w({var})"),
            Op::Read { var, .. } => write!(f, "r({var})"),
            Op::Make { chan, capacity } => write!(f, "make({chan},{capacity})"),
            Op::Send { chan, seq, value } => write!(f, "send({chan}#{seq},{value})"),
            Op::SendComplete { chan, seq } => write!(f, "send-done({chan}#{seq})"),
            Op::Recv { chan, seq } => write!(f, "recv({chan}#{seq})"),
            Op::RecvComplete { chan, seq, value } => write!(f, "recv-done({chan}#{seq},{value})"),
            Op::Rendezvous {
                chan,
                sender,
                receiver,
                value,
            } => write!(f, "rendezvous({chan},{sender}->{receiver},{value})"),
            Op::Close { chan } => write!(f, "close({chan})"),
            Op::RecvEot { chan } => write!(f, "recv-eot({chan})"),
            Op::Spawn { child } => write!(f, "go({child})"),
            Op::Acquire { lock } => write!(f, "acquire({lock})"),
            Op::Release { lock } => write!(f, "release({lock})"),
            Op::Tau => f.write_str("tau"),
        }
    }
}
