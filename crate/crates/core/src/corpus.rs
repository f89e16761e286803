//! The example programs shipped with the crate, embedded at build time.

use crate::syntax::{parse, Program};

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        /// `(name, source)` pairs; the files live in `corpus/<name>.mini`.
        pub const CORPUS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../corpus/", $name, ".mini")))),*
        ];
    };
}

corpus!(
    "listing1",
    "listing2",
    "message-passing",
    "mutex",
    "producer-consumer",
    "conditional-race-k0",
    "conditional-race-k1",
    "conditional-race-k2",
    "two-writers",
    "select-default",
    "closed-channel-eot",
    "lock-critical-section",
);

pub fn source(name: &str) -> Option<&'static str> {
    CORPUS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a corpus program.
///
/// # Panics
///
/// If `name` is not in the corpus. Every corpus file parses; a unit test
/// checks it.
pub fn program(name: &str) -> Program {
    let src = source(name).unwrap_or_else(|| panic!("no corpus program `{name}`"));
    parse(src).unwrap_or_else(|e| panic!("corpus program `{name}`: {e}"))
}
