//! Run-time names: thread ids, channel references and access labels.
//!
//! Fresh names are derived from the issuing thread (its pid plus a per-thread
//! counter) instead of one global counter. Two steps by different threads
//! therefore issue the same names whichever runs first, so configurations
//! reached through commuted schedules compare equal without renaming.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Identifier of a shared variable, lock or local binder.
pub type Name = Arc<str>;

/// Thread identifier: the spawn path from the root thread.
///
/// The root is `p0`; the `k`-th thread spawned by `p` is `p.k` (1-based).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Pid(Vec<u32>);

impl Pid {
    pub fn root() -> Self {
        Pid(Vec::new())
    }

    pub fn child(&self, index: u32) -> Self {
        let mut path = self.0.clone();
        path.push(index);
        Pid(path)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("p0")?;
        for k in &self.0 {
            write!(f, ".{k}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Pid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('.');
        if parts.next() != Some("p0") {
            return Err(format!("`{s}` is not a pid"));
        }
        parts
            .map(|k| k.parse().map_err(|_| format!("`{s}` is not a pid")))
            .collect::<Result<_, _>>()
            .map(Pid)
    }
}

/// Reference to a dynamically created channel.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ChanId {
    pub creator: Pid,
    pub index: u32,
}

impl fmt::Display for ChanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/c{}", self.creator, self.index)
    }
}

impl fmt::Debug for ChanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ChanId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not a channel name");
        let (creator, index) = s.split_once("/c").ok_or_else(bad)?;
        Ok(ChanId {
            creator: creator.parse()?,
            index: index.parse().map_err(|_| bad())?,
        })
    }
}

/// Unique name of one memory event.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Label {
    pub issuer: Pid,
    pub seq: u32,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/m{}", self.issuer, self.seq)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not a label");
        let (issuer, seq) = s.split_once("/m").ok_or_else(bad)?;
        Ok(Label {
            issuer: issuer.parse()?,
            seq: seq.parse().map_err(|_| bad())?,
        })
    }
}

macro_rules! string_serde {
    ($($ty:ty),*) => {$(
        impl From<$ty> for String {
            fn from(v: $ty) -> String {
                v.to_string()
            }
        }

        impl TryFrom<String> for $ty {
            type Error = String;

            fn try_from(s: String) -> Result<Self, String> {
                s.parse()
            }
        }
    )*};
}

string_serde!(Pid, ChanId, Label);
