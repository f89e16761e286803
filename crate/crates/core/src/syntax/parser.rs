use std::collections::BTreeSet;

use super::ast::{Branch, Expr, Guard, Program, Term, Value, WILDCARD};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::names::Name;

pub fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        vars: BTreeSet::new(),
        locks: BTreeSet::new(),
        scope: Vec::new(),
    };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    vars: BTreeSet<String>,
    locks: BTreeSet<String>,
    scope: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.tokens[self.pos];
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Kw(k) => format!("keyword `{k}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Kw(k) if *k == kw)
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", Self::describe(self.peek())))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.at_sym(sym) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{sym}`, found {}", Self::describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut vars = Vec::new();
        let mut locks = Vec::new();
        while self.at_kw("var") {
            self.bump();
            let (line, col) = self.here();
            let name = self.ident()?;
            self.expect_sym("=")?;
            let init = self.literal()?;
            self.expect_sym(";")?;
            if !self.vars.insert(name.clone()) {
                return Err(ParseError::Duplicate { line, col, name });
            }
            vars.push((Name::from(name.as_str()), init));
        }
        while self.at_kw("lock") {
            self.bump();
            let (line, col) = self.here();
            let name = self.ident()?;
            self.expect_sym(";")?;
            if self.vars.contains(&name) || !self.locks.insert(name.clone()) {
                return Err(ParseError::Duplicate { line, col, name });
            }
            locks.push(Name::from(name.as_str()));
        }
        self.expect_kw("main")?;
        self.expect_sym("{")?;
        let main = self.term()?;
        self.expect_sym("}")?;
        if *self.peek() != Tok::Eof {
            return self.error(format!("expected end of input, found {}", Self::describe(self.peek())));
        }
        Ok(Program { vars, locks, main })
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn literal(&mut self) -> Result<Value, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Value::Int(n))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Value::Bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Value::Bool(false))
            }
            Tok::Sym("()") => {
                self.bump();
                Ok(Value::Unit)
            }
            other => self.error(format!("expected literal, found {}", Self::describe(&other))),
        }
    }

    fn starts_value(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Int(_) | Tok::Kw("true") | Tok::Kw("false") | Tok::Sym("()") | Tok::Ident(_)
        )
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        if let Tok::Ident(name) = self.peek().clone() {
            let (line, col) = self.here();
            if name == WILDCARD || !self.scope.contains(&name) {
                return Err(ParseError::UnboundLocal { line, col, name });
            }
            self.bump();
            return Ok(Value::Local(name.as_str().into()));
        }
        self.literal()
    }

    fn shared_var(&mut self) -> Result<Name, ParseError> {
        let (line, col) = self.here();
        let name = self.ident()?;
        if !self.vars.contains(&name) {
            return Err(ParseError::UndeclaredVariable { line, col, name });
        }
        Ok(name.as_str().into())
    }

    fn lock_name(&mut self) -> Result<Name, ParseError> {
        let (line, col) = self.here();
        let name = self.ident()?;
        if !self.locks.contains(&name) {
            return Err(ParseError::UndeclaredLock { line, col, name });
        }
        Ok(name.as_str().into())
    }

    /// Continuation after a statement: `; term`, or `stop` when absent.
    fn rest(&mut self) -> Result<Term, ParseError> {
        if self.at_sym(";") {
            self.bump();
            if self.at_sym("}") || self.at_sym("|") || self.at_kw("case") || *self.peek() == Tok::Eof {
                return Ok(Term::stop());
            }
            self.term()
        } else {
            Ok(Term::stop())
        }
    }

    fn block(&mut self) -> Result<Term, ParseError> {
        self.expect_sym("{")?;
        let t = self.term()?;
        self.expect_sym("}")?;
        Ok(t)
    }

    fn scoped<T>(&mut self, binder: &str, f: impl FnOnce(&mut Self) -> Result<T, ParseError>) -> Result<T, ParseError> {
        self.scope.push(binder.to_string());
        let out = f(self);
        self.scope.pop();
        out
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Kw("let") => {
                self.bump();
                let binder = self.ident()?;
                self.expect_sym("=")?;
                let expr = self.expr()?;
                self.expect_kw("in")?;
                let body = self.scoped(&binder, |p| p.term())?;
                Ok(Term::Let {
                    binder: binder.as_str().into(),
                    expr,
                    body: Box::new(body),
                })
            }
            Tok::Kw("go") => {
                self.bump();
                let body = self.block()?;
                let next = self.rest()?;
                Ok(Term::Go {
                    body: Box::new(body),
                    next: Box::new(next),
                })
            }
            Tok::Kw("if") => {
                self.bump();
                let cond = self.value()?;
                let equals = if self.at_sym("==") {
                    self.bump();
                    Some(self.value()?)
                } else {
                    None
                };
                self.expect_kw("then")?;
                let then_branch = self.block()?;
                self.expect_kw("else")?;
                let else_branch = self.block()?;
                Ok(Term::If {
                    cond,
                    equals,
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                })
            }
            Tok::Kw("select") => {
                self.bump();
                self.expect_sym("{")?;
                let mut branches = Vec::new();
                let mut has_default = false;
                while self.at_kw("case") {
                    let (line, col) = self.here();
                    let branch = self.branch()?;
                    if branch.guard == Guard::Default {
                        if has_default {
                            return Err(ParseError::DuplicateDefault { line, col });
                        }
                        has_default = true;
                    }
                    branches.push(branch);
                    if self.at_sym("|") {
                        self.bump();
                    }
                }
                self.expect_sym("}")?;
                Ok(Term::Select(branches))
            }
            Tok::Kw("stop") => {
                self.bump();
                Ok(Term::stop())
            }
            Tok::Kw("close") => {
                self.bump();
                self.expect_sym("(")?;
                let chan = self.value()?;
                self.expect_sym(")")?;
                let next = self.rest()?;
                Ok(Term::Close {
                    chan,
                    next: Box::new(next),
                })
            }
            Tok::Kw(kw @ ("acquire" | "release")) => {
                self.bump();
                self.expect_sym("(")?;
                let lock = self.lock_name()?;
                self.expect_sym(")")?;
                let next = Box::new(self.rest()?);
                Ok(if kw == "acquire" {
                    Term::Acquire { lock, next }
                } else {
                    Term::Release { lock, next }
                })
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::Sym(":=") => {
                let var = self.shared_var()?;
                self.bump();
                if !self.starts_value() {
                    return self.error("store expects a literal or a local variable");
                }
                let value = self.value()?;
                let next = self.rest()?;
                Ok(Term::Store {
                    var,
                    value,
                    next: Box::new(next),
                })
            }
            _ => {
                let expr = self.expr()?;
                let next = self.rest()?;
                Ok(Term::seq(expr, next))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Kw("load") => {
                self.bump();
                Ok(Expr::Load(self.shared_var()?))
            }
            Tok::Kw("make") => {
                self.bump();
                self.expect_sym("(")?;
                self.expect_kw("chan")?;
                self.expect_sym(",")?;
                let k = match self.peek().clone() {
                    Tok::Int(n) if n >= 0 && n <= u32::MAX as i64 => {
                        self.bump();
                        n as u32
                    }
                    other => {
                        return self.error(format!(
                            "expected non-negative channel capacity, found {}",
                            Self::describe(&other)
                        ))
                    }
                };
                self.expect_sym(")")?;
                Ok(Expr::MakeChan(k))
            }
            Tok::Sym("<-") => {
                self.bump();
                Ok(Expr::Recv(self.value()?))
            }
            _ if self.starts_value() => {
                let v = self.value()?;
                if self.at_sym("<-") {
                    self.bump();
                    let value = self.value()?;
                    Ok(Expr::Send { chan: v, value })
                } else {
                    Ok(Expr::Value(v))
                }
            }
            other => self.error(format!("expected a term, found {}", Self::describe(&other))),
        }
    }

    fn branch(&mut self) -> Result<Branch, ParseError> {
        self.expect_kw("case")?;
        let binder = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Sym("=") {
            let b = self.ident()?;
            self.bump();
            b
        } else {
            WILDCARD.to_string()
        };
        let guard = match self.peek().clone() {
            Tok::Kw("default") => {
                self.bump();
                Guard::Default
            }
            Tok::Sym("<-") => {
                self.bump();
                Guard::Recv(self.value()?)
            }
            _ if self.starts_value() => {
                let chan = self.value()?;
                self.expect_sym("<-")?;
                let value = self.value()?;
                Guard::Send { chan, value }
            }
            other => {
                return self.error(format!(
                    "expected a send, receive or default guard, found {}",
                    Self::describe(&other)
                ))
            }
        };
        self.expect_sym("=>")?;
        let body = self.scoped(&binder, |p| p.term())?;
        Ok(Branch {
            guard,
            binder: binder.as_str().into(),
            body,
        })
    }
}
