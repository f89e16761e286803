//! A message on a channel carries the sender's past to the receiver, so the
//! consumer's read of `z` is ordered after the producer's write.
//!
//! `cargo run --example message_passing`

use hbrace::corpus;
use hbrace::detector::{DetectorOptions, HbSetDetector, HbVariant};
use hbrace::explorer::{build_hb_order, classify_races};
use hbrace::report::run_with_report;
use hbrace::runtime::{Op, RandomScheduler, Runtime};

fn main() {
    let program = corpus::program("message-passing");
    let rt = Runtime::new(HbSetDetector::new(HbVariant::War, DetectorOptions::default()));
    let (result, report) = run_with_report(&rt, &program, &mut RandomScheduler::new(7)).unwrap();
    print!("{}", report.trace_lines());

    let order = build_hb_order(&result.trace).unwrap();
    let position = |write: bool| {
        result
            .trace
            .iter()
            .position(|e| matches!((&e.op, write), (Op::Write { .. }, true) | (Op::Read { .. }, false)))
    };
    if let (Some(w), Some(r)) = (position(true), position(false)) {
        println!("write happens before read: {}", order.before(w, r));
    }
    println!("unordered conflicting pairs: {}", classify_races(&order).len());
    println!("outcome: {:?}", result.outcome);
}
