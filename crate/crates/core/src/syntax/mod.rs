//! Abstract syntax, concrete text syntax and desugaring of the calculus.
//!
//! ```text
//! program := {"var" ident "=" literal ";"} {"lock" ident ";"} "main" "{" term "}"
//! term    := "let" ident "=" expr "in" term
//!          | ident ":=" value [";" term]
//!          | "go" "{" term "}" [";" term]
//!          | "if" value ["==" value] "then" "{" term "}" "else" "{" term "}"
//!          | "select" "{" {branch ["|"]} "}"
//!          | "stop"
//!          | "close" "(" value ")" [";" term]
//!          | ("acquire" | "release") "(" ident ")" [";" term]
//!          | expr [";" term]                        // let _ = expr in term
//! expr    := value | "load" ident | "make" "(" "chan" "," int ")"
//!          | value "<-" value | "<-" value
//! branch  := "case" [ident "="] guard "=>" term
//! guard   := "<-" value | value "<-" value | "default"
//! value   := int | "true" | "false" | "()" | ident
//! ```
//!
//! A missing continuation means `stop`. `//` starts a line comment.

mod ast;
mod lexer;
mod parser;
mod pretty;

use thiserror::Error;

pub use ast::{Branch, Expr, Guard, Program, Term, Value, WILDCARD};
pub use parser::parse;
pub use pretty::{pretty, pretty_term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: select has more than one default branch")]
    DuplicateDefault { line: usize, col: usize },
    #[error("{line}:{col}: undeclared shared variable `{name}`")]
    UndeclaredVariable { line: usize, col: usize, name: String },
    #[error("{line}:{col}: undeclared lock `{name}`")]
    UndeclaredLock { line: usize, col: usize, name: String },
    #[error("{line}:{col}: unbound local `{name}`")]
    UnboundLocal { line: usize, col: usize, name: String },
    #[error("{line}:{col}: `{name}` declared twice")]
    Duplicate { line: usize, col: usize, name: String },
}
