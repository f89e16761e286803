//! Parses a program, pretty-prints it, and runs it once.
//!
//! `cargo run --example parse_and_print -- path/to/program.mini`

use hbrace::detector::{DetectorOptions, HbSetDetector, HbVariant};
use hbrace::runtime::{PrefixScheduler, Runtime};
use hbrace::syntax::{parse, pretty};

const DEFAULT: &str = "var z = 0; main { let c = make(chan, 1) in go { z := 1; c <- 0 }; <- c; load z }";

fn main() {
    let source = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable program"),
        None => DEFAULT.to_string(),
    };
    let program = match parse(&source) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    };
    print!("{}", pretty(&program));
    let rt = Runtime::new(HbSetDetector::new(HbVariant::War, DetectorOptions::default()));
    let r = rt.run(&program, &mut PrefixScheduler::default()).unwrap();
    println!("first-choice run: {:?} after {} steps", r.outcome, r.choices.len());
}
