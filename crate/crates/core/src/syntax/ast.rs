use std::fmt;

use serde::{Deserialize, Serialize};

use crate::names::{ChanId, Name};

/// Binder used by the `e; t` sugar. It is never referenced.
pub const WILDCARD: &str = "_";

/// Serialized as a JSON number or boolean, or as a string: `"()"`,
/// `"#eot"`, `"#p0/c1"` for channels and the bare name for locals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "ValueRepr", try_from = "ValueRepr")]
pub enum Value {
    Unit,
    Int(i64),
    Bool(bool),
    /// Run-time only: produced by channel creation.
    Chan(ChanId),
    /// Run-time only: observed when receiving from a closed channel.
    Eot,
    /// Reference to a `let`- or branch-bound local.
    Local(Name),
}

impl Value {
    pub fn is_closed_form(&self) -> bool {
        !matches!(self, Value::Local(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("()"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Chan(c) => write!(f, "#{c}"),
            Value::Eot => f.write_str("#eot"),
            Value::Local(r) => f.write_str(r),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<Value> for ValueRepr {
    fn from(v: Value) -> Self {
        match v {
            Value::Int(n) => ValueRepr::Int(n),
            Value::Bool(b) => ValueRepr::Bool(b),
            other => ValueRepr::Text(other.to_string()),
        }
    }
}

impl TryFrom<ValueRepr> for Value {
    type Error = String;

    fn try_from(r: ValueRepr) -> Result<Self, Self::Error> {
        Ok(match r {
            ValueRepr::Int(n) => Value::Int(n),
            ValueRepr::Bool(b) => Value::Bool(b),
            ValueRepr::Text(s) if s == "()" => Value::Unit,
            ValueRepr::Text(s) if s == "#eot" => Value::Eot,
            ValueRepr::Text(s) => match s.strip_prefix('#') {
                Some(chan) => Value::Chan(chan.parse()?),
                None => Value::Local(s.as_str().into()),
            },
        })
    }
}

/// Right-hand side of a `let`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Value(Value),
    Load(Name),
    MakeChan(u32),
    Send { chan: Value, value: Value },
    Recv(Value),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Guard {
    Send { chan: Value, value: Value },
    Recv(Value),
    Default,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Branch {
    pub guard: Guard,
    pub binder: Name,
    pub body: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Let {
        binder: Name,
        expr: Expr,
        body: Box<Term>,
    },
    Store {
        var: Name,
        value: Value,
        next: Box<Term>,
    },
    Go {
        body: Box<Term>,
        next: Box<Term>,
    },
    If {
        cond: Value,
        equals: Option<Value>,
        then_branch: Box<Term>,
        else_branch: Box<Term>,
    },
    /// `stop` is the empty select.
    Select(Vec<Branch>),
    Close {
        chan: Value,
        next: Box<Term>,
    },
    Acquire {
        lock: Name,
        next: Box<Term>,
    },
    Release {
        lock: Name,
        next: Box<Term>,
    },
}

impl Term {
    pub fn stop() -> Self {
        Term::Select(Vec::new())
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, Term::Select(branches) if branches.is_empty())
    }

    /// `e; t`
    pub fn seq(expr: Expr, next: Term) -> Self {
        Term::Let {
            binder: WILDCARD.into(),
            expr,
            body: Box::new(next),
        }
    }

    /// Replaces free occurrences of local `name` by `value`.
    pub fn subst(&self, name: &str, value: &Value) -> Term {
        let v = |x: &Value| subst_value(x, name, value);
        let under = |binder: &Name, t: &Term| {
            if &**binder == name {
                t.clone()
            } else {
                t.subst(name, value)
            }
        };
        match self {
            Term::Let { binder, expr, body } => Term::Let {
                binder: binder.clone(),
                expr: match expr {
                    Expr::Value(x) => Expr::Value(v(x)),
                    Expr::Load(z) => Expr::Load(z.clone()),
                    Expr::MakeChan(k) => Expr::MakeChan(*k),
                    Expr::Send { chan, value: x } => Expr::Send {
                        chan: v(chan),
                        value: v(x),
                    },
                    Expr::Recv(c) => Expr::Recv(v(c)),
                },
                body: Box::new(under(binder, body)),
            },
            Term::Store { var, value: x, next } => Term::Store {
                var: var.clone(),
                value: v(x),
                next: Box::new(next.subst(name, value)),
            },
            Term::Go { body, next } => Term::Go {
                body: Box::new(body.subst(name, value)),
                next: Box::new(next.subst(name, value)),
            },
            Term::If {
                cond,
                equals,
                then_branch,
                else_branch,
            } => Term::If {
                cond: v(cond),
                equals: equals.as_ref().map(v),
                then_branch: Box::new(then_branch.subst(name, value)),
                else_branch: Box::new(else_branch.subst(name, value)),
            },
            Term::Select(branches) => Term::Select(
                branches
                    .iter()
                    .map(|b| Branch {
                        guard: match &b.guard {
                            Guard::Send { chan, value: x } => Guard::Send {
                                chan: v(chan),
                                value: v(x),
                            },
                            Guard::Recv(c) => Guard::Recv(v(c)),
                            Guard::Default => Guard::Default,
                        },
                        binder: b.binder.clone(),
                        body: under(&b.binder, &b.body),
                    })
                    .collect(),
            ),
            Term::Close { chan, next } => Term::Close {
                chan: v(chan),
                next: Box::new(next.subst(name, value)),
            },
            Term::Acquire { lock, next } => Term::Acquire {
                lock: lock.clone(),
                next: Box::new(next.subst(name, value)),
            },
            Term::Release { lock, next } => Term::Release {
                lock: lock.clone(),
                next: Box::new(next.subst(name, value)),
            },
        }
    }
}

fn subst_value(x: &Value, name: &str, value: &Value) -> Value {
    match x {
        Value::Local(r) if &**r == name => value.clone(),
        other => other.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub vars: Vec<(Name, Value)>,
    pub locks: Vec<Name>,
    pub main: Term,
}
