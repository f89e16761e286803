//! Mutual exclusion two ways: a capacity-1 channel used as a semaphore, and
//! an explicit lock. Both are race free with two possible final values.
//!
//! `cargo run --example mutex`

use hbrace::corpus;
use hbrace::detector::{DetectorOptions, HbSetDetector, HbVariant};
use hbrace::explorer::summarize;
use hbrace::explorer::ExploreOptions;
use hbrace::runtime::Runtime;

fn main() {
    let rt = Runtime::new(HbSetDetector::new(HbVariant::Gc, DetectorOptions::default()));
    for name in ["mutex", "lock-critical-section"] {
        let summary = summarize(&rt, &corpus::program(name), ExploreOptions::default());
        println!(
            "{name}: {} schedules, {} flagged, final z in {:?}",
            summary.schedules,
            summary.flagged,
            summary.final_values("z")
        );
    }
}
