//! A receiver reads `z` only when it got the second message. With capacity
//! two that read races with the other consumer's write, yet no schedule
//! equivalent to the racy one puts the two accesses side by side: FIFO order
//! makes the competing receives dependent.
//!
//! `cargo run --example conditional_race`

use hbrace::corpus;
use hbrace::detector::{DetectorOptions, HbSetDetector, HbVariant};
use hbrace::explorer::{explore, find_manifest, ExploreOptions, ManifestResult};
use hbrace::runtime::Runtime;

fn main() {
    let rt = Runtime::new(HbSetDetector::new(HbVariant::War, DetectorOptions::default()));
    for k in 0..3 {
        let name = format!("conditional-race-k{k}");
        let program = corpus::program(&name);
        let (mut found, mut none) = (0, 0);
        let summary = explore(&rt, &program, ExploreOptions::default(), &mut |r| {
            if r.outcome.race().is_some() {
                match find_manifest(&program, &r.choices, 100_000) {
                    ManifestResult::Found(_) => found += 1,
                    ManifestResult::None { .. } => none += 1,
                    ManifestResult::Inconclusive { visited } => println!("  gave up after {visited}"),
                }
            }
        });
        println!(
            "capacity {k}: {} schedules, {} flagged ({:?}); manifest witness in {found}, none in {none}",
            summary.schedules, summary.flagged, summary.by_kind
        );
    }
}
