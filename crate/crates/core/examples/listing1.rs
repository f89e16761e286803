//! Two threads touch `a` with no synchronization. Every schedule races; the
//! read-first order is a WaR that the write-only detector cannot see.
//!
//! `cargo run --example listing1`

use hbrace::corpus;
use hbrace::detector::{DetectorKind, DetectorOptions};
use hbrace::explorer::{explore, verdict_of, ExploreOptions};
use hbrace::runtime::Runtime;
use hbrace::with_detector;

fn main() {
    let program = corpus::program("listing1");
    println!("{}", corpus::source("listing1").unwrap());
    for kind in [DetectorKind::Aw, DetectorKind::War, DetectorKind::Gc] {
        with_detector!(kind, DetectorOptions::default(), |d| {
            let summary = explore(&Runtime::new(d), &program, ExploreOptions::default(), &mut |r| {
                println!("{kind:>6} schedule {:?}: {:?}", r.indices, verdict_of(r));
            });
            println!(
                "{kind:>6}: {} of {} schedules flagged\n",
                summary.flagged, summary.schedules
            );
        });
    }
}
