//! Metadata held by happens-before sets and by vector clocks in a
//! producer/consumer run, just before and just after the producer's second
//! write. With collection after every step the sets shrink to one entry;
//! the clocks keep every stale component.
//!
//! `cargo run --example footprint`

use hbrace::corpus;
use hbrace::detector::{Detector, DetectorOptions, GcMode, HbSetDetector, HbVariant, VcDetector, VcMode};
use hbrace::names::Pid;
use hbrace::report::{render_hb_set, snapshot, Renaming};
use hbrace::runtime::{ConfigOf, Op, RandomScheduler, Runtime};

/// Configurations before and after every step, and the step of the root
/// thread's second write.
fn around_second_write<D: Detector>(
    rt: &Runtime<D>,
    seed: u64,
) -> (Vec<ConfigOf<D>>, usize, Vec<hbrace::runtime::Event>) {
    let program = corpus::program("producer-consumer");
    let mut configs = Vec::new();
    let r = rt
        .run_observed(&program, &mut RandomScheduler::new(seed), &mut |_, c| {
            configs.push(c.clone())
        })
        .unwrap();
    let step = r
        .trace
        .iter()
        .filter(|e| e.pid == Pid::root() && matches!(e.op, Op::Write { .. }))
        .nth(1)
        .expect("the producer writes twice")
        .step;
    (configs, step, r.trace)
}

fn main() {
    let program = corpus::program("producer-consumer");
    let gc = Runtime::new(HbSetDetector::new(
        HbVariant::Gc,
        DetectorOptions {
            gc: GcMode::Every(1),
            max_reads: None,
        },
    ));
    let (configs, step, trace) = around_second_write(&gc, 0);
    let names = Renaming::for_run(&gc, &program, &trace);
    for (when, config) in [("before", &configs[step]), ("after", &configs[step + 1])] {
        println!("happens-before sets {when} the second write:");
        for (pid, t) in &config.threads {
            println!("  {pid}: {}", render_hb_set(&t.knowledge, &names));
        }
        println!("  thread total {}", snapshot(&gc.detector, step, config).thread_total());
    }

    let vc = Runtime::new(VcDetector::new(VcMode::FastTrack));
    let (configs, step, _) = around_second_write(&vc, 0);
    for (when, config) in [("before", &configs[step]), ("after", &configs[step + 1])] {
        println!("vector clocks {when} the second write:");
        for (pid, t) in &config.threads {
            println!("  {pid}: {:?}", t.knowledge);
        }
        println!("  thread total {}", snapshot(&vc.detector, step, config).thread_total());
    }
}
