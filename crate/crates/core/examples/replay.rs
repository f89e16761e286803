//! Records the scheduler's choices of a random run as a script, replays the
//! script, and checks that both reports are byte for byte the same.
//!
//! `cargo run --example replay -- [seed]`

use hbrace::corpus;
use hbrace::detector::{DetectorOptions, HbSetDetector, HbVariant};
use hbrace::report::run_with_report;
use hbrace::runtime::{RandomScheduler, Runtime, ScriptedScheduler};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let program = corpus::program("closed-channel-eot");
    let rt = Runtime::new(HbSetDetector::new(HbVariant::Gc, DetectorOptions::default()));

    let (first, report) = run_with_report(&rt, &program, &mut RandomScheduler::new(seed)).unwrap();
    let script = ScriptedScheduler::render(&first.indices);
    println!("script: {}", script.split_whitespace().collect::<Vec<_>>().join(" "));

    let mut scripted = ScriptedScheduler::parse(&script).unwrap();
    let (_, again) = run_with_report(&rt, &program, &mut scripted).unwrap();
    assert_eq!(report.to_json(), again.to_json());
    println!(
        "replayed {} steps, identical report ({} bytes)",
        first.indices.len(),
        report.to_json().len()
    );
}
