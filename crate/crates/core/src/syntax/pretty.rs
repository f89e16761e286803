use std::fmt::Write;

use super::ast::{Branch, Expr, Guard, Program, Term, WILDCARD};

/// Renders a program in the concrete syntax accepted by [`super::parse`].
///
/// `stop` is always spelled `stop`; `let _ = e in t` is spelled `e; t`.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for (name, init) in &program.vars {
        let _ = writeln!(out, "var {name} = {init};");
    }
    for lock in &program.locks {
        let _ = writeln!(out, "lock {lock};");
    }
    out.push_str("main {\n");
    term(&mut out, &program.main, 1);
    out.push_str("\n}\n");
    out
}

/// Single-line rendering of a term, used in diagnostics and traces.
pub fn pretty_term(t: &Term) -> String {
    let mut out = String::new();
    term(&mut out, t, 0);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn expr(e: &Expr) -> String {
    match e {
        Expr::Value(v) => v.to_string(),
        Expr::Load(z) => format!("load {z}"),
        Expr::MakeChan(k) => format!("make(chan, {k})"),
        Expr::Send { chan, value } => format!("{chan} <- {value}"),
        Expr::Recv(c) => format!("<- {c}"),
    }
}

fn then(out: &mut String, next: &Term, level: usize) {
    out.push_str(";\n");
    term(out, next, level);
}

fn term(out: &mut String, t: &Term, level: usize) {
    indent(out, level);
    match t {
        Term::Let { binder, expr: e, body } => {
            if &**binder == WILDCARD {
                out.push_str(&expr(e));
                then(out, body, level);
            } else {
                let _ = writeln!(out, "let {binder} = {} in", expr(e));
                term(out, body, level);
            }
        }
        Term::Store { var, value, next } => {
            let _ = write!(out, "{var} := {value}");
            then(out, next, level);
        }
        Term::Go { body, next } => {
            out.push_str("go {\n");
            term(out, body, level + 1);
            out.push('\n');
            indent(out, level);
            out.push('}');
            then(out, next, level);
        }
        Term::If {
            cond,
            equals,
            then_branch,
            else_branch,
        } => {
            let _ = write!(out, "if {cond}");
            if let Some(rhs) = equals {
                let _ = write!(out, " == {rhs}");
            }
            out.push_str(" then {\n");
            term(out, then_branch, level + 1);
            out.push('\n');
            indent(out, level);
            out.push_str("} else {\n");
            term(out, else_branch, level + 1);
            out.push('\n');
            indent(out, level);
            out.push('}');
        }
        Term::Select(branches) if branches.is_empty() => out.push_str("stop"),
        Term::Select(branches) => {
            out.push_str("select {\n");
            for b in branches {
                branch(out, b, level + 1);
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
        Term::Close { chan, next } => {
            let _ = write!(out, "close({chan})");
            then(out, next, level);
        }
        Term::Acquire { lock, next } => {
            let _ = write!(out, "acquire({lock})");
            then(out, next, level);
        }
        Term::Release { lock, next } => {
            let _ = write!(out, "release({lock})");
            then(out, next, level);
        }
    }
}

fn guard(g: &Guard) -> String {
    match g {
        Guard::Send { chan, value } => format!("{chan} <- {value}"),
        Guard::Recv(c) => format!("<- {c}"),
        Guard::Default => "default".to_string(),
    }
}

fn branch(out: &mut String, b: &Branch, level: usize) {
    indent(out, level);
    out.push_str("case ");
    if &*b.binder != WILDCARD {
        let _ = write!(out, "{} = ", b.binder);
    }
    let _ = writeln!(out, "{} =>", guard(&b.guard));
    term(out, &b.body, level + 1);
}
