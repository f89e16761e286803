//! Every detector pair on every corpus program, schedule by schedule.
//!
//! `cargo run --example compare_detectors`

use hbrace::corpus;
use hbrace::detector::{DetectorKind, DetectorOptions};
use hbrace::explorer::{compare_exhaustive, ExploreOptions};
use hbrace::runtime::Runtime;
use hbrace::with_detector;

fn main() {
    for (name, _) in corpus::CORPUS {
        let program = corpus::program(name);
        for (i, a) in DetectorKind::ALL.into_iter().enumerate() {
            for b in DetectorKind::ALL.into_iter().skip(i + 1) {
                let report = with_detector!(a, DetectorOptions::default(), |da| {
                    with_detector!(b, DetectorOptions::default(), |db| {
                        compare_exhaustive(
                            &Runtime::new(da),
                            &Runtime::new(db),
                            &program,
                            ExploreOptions::default(),
                        )
                    })
                });
                if !report.diffs.is_empty() {
                    println!(
                        "{name}: {a} vs {b} differ on {} of {} schedules",
                        report.diffs.len(),
                        report.schedules
                    );
                }
            }
        }
    }
    println!("pairs not listed agree on every schedule");
}
