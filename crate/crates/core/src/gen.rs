//! Random well-formed programs for property tests and fuzzing.
//!
//! Programs use two variables, one lock and two channels of random capacity,
//! run three threads (main plus two spawned), and mix every statement form
//! of the calculus. They may deadlock or panic; that is intended.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::syntax::{parse, Program};

/// Source text of a random program.
pub fn random_source(rng: &mut impl Rng) -> String {
    let k0 = rng.gen_range(0..3);
    let k1 = rng.gen_range(0..3);
    let mut out = format!(
        "var x = 0;\nvar y = 0;\nlock l;\nmain {{\n    let c0 = make(chan, {k0}) in\n    let c1 = make(chan, {k1}) in\n"
    );
    for _ in 0..2 {
        out.push_str(&format!("    go {{ {} }};\n", block(rng, 1)));
    }
    out.push_str(&format!("    {}\n}}\n", block(rng, 1)));
    out
}

pub fn random_program(rng: &mut impl Rng) -> Program {
    let src = random_source(rng);
    parse(&src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"))
}

fn block(rng: &mut impl Rng, depth: u32) -> String {
    let n = rng.gen_range(1..=4);
    let mut stmts = Vec::new();
    for _ in 0..n {
        let (s, terminal) = stmt(rng, depth);
        stmts.push(s);
        if terminal {
            return stmts.join("; ");
        }
    }
    stmts.push("stop".into());
    stmts.join("; ")
}

fn var(rng: &mut impl Rng) -> &'static str {
    ["x", "y"].choose(rng).copied().unwrap_or("x")
}

fn chan(rng: &mut impl Rng) -> &'static str {
    ["c0", "c1"].choose(rng).copied().unwrap_or("c0")
}

fn simple(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..5) {
        0 | 1 => format!("{} := {}", var(rng), rng.gen_range(1..4)),
        2 | 3 => format!("load {}", var(rng)),
        _ => format!("let r = load {} in r", var(rng)),
    }
}

/// A statement, and whether it must end its block (`if` and `select` take no
/// continuation).
fn stmt(rng: &mut impl Rng, depth: u32) -> (String, bool) {
    let terminal = |s: String| (s, true);
    let s = match rng.gen_range(0..20) {
        0..=5 => simple(rng),
        6..=8 => format!("{} <- {}", chan(rng), rng.gen_range(0..2)),
        9..=11 => format!("<- {}", chan(rng)),
        12 => {
            return terminal(format!(
                "let r = <- {} in if r == 1 then {{ {}; stop }} else {{ stop }}",
                chan(rng),
                simple(rng)
            ))
        }
        13 | 14 => format!("acquire(l); {}; release(l)", simple(rng)),
        15 | 16 => {
            let default = if rng.gen_bool(0.5) {
                format!(" case default => {}; stop", simple(rng))
            } else {
                String::new()
            };
            return terminal(format!(
                "select {{ case <- {} => {}; stop case {} <- 1 => stop{} }}",
                chan(rng),
                simple(rng),
                chan(rng),
                default
            ));
        }
        17 => format!("close({})", chan(rng)),
        _ if depth < 2 => format!("go {{ {} }}", block(rng, depth + 1)),
        _ => simple(rng),
    };
    (s, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_programs_parse_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = random_program(&mut rng);
            assert_eq!(parse(&crate::syntax::pretty(&p)).unwrap(), p);
        }
    }
}
