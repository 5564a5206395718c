//! Front end shared by the city (CGA-style) and agenda rule languages.
//!
//! Both languages use the same lexer, parser and expression evaluator. They
//! differ only in which operations and functions their interpreters provide.

pub mod ast;
pub mod error;
pub mod eval;
pub mod parser;
pub mod print;
pub mod resolve;
pub mod token;

use std::fmt;

pub use ast::{Expr, ExprKind, Rule, RuleFile, SuccessorItem};
pub use error::RuleError;
pub use eval::{evaluate, Arg, EntityKind, EntityRef, Environment, Signature, Value};
pub use parser::{parse_expression, parse_rule_file};
pub use print::{print_expr, print_rule_file};
pub use resolve::RuleSet;

/// 1-based line and column of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}
