use thiserror::Error;

use super::Pos;

/// Errors raised while reading, resolving or evaluating rule files.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum RuleError {
    #[error("{pos}: lexical error: {msg}")]
    Lex { pos: Pos, msg: String },
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: duplicate rule `{name}`")]
    DuplicateRule { name: String, pos: Pos },
    #[error("duplicate parameter `{param}` in rule `{rule}`")]
    DuplicateParam { rule: String, param: String },
    #[error("no start rule: annotate one rule with @StartRule or pass a start rule explicitly")]
    MissingStartRule,
    #[error("{count} rules are annotated with @StartRule; exactly one is allowed")]
    MultipleStartRules { count: usize },
    #[error("start rule `{0}` is not defined")]
    UnknownStartRule(String),
    #[error("import of `{path}` failed: {msg}")]
    Import { path: String, msg: String },
    #[error("{pos}: unknown variable `{name}`")]
    UnknownVariable { name: String, pos: Pos },
    #[error("{pos}: unknown function `{name}`")]
    UnknownFunction { name: String, pos: Pos },
    #[error("{pos}: type mismatch: {msg}")]
    TypeMismatch { pos: Pos, msg: String },
    #[error("{pos}: {msg}")]
    Runtime { pos: Pos, msg: String },
}

impl RuleError {
    pub fn runtime(pos: Pos, msg: impl Into<String>) -> Self {
        RuleError::Runtime { pos, msg: msg.into() }
    }

    pub fn mismatch(pos: Pos, msg: impl Into<String>) -> Self {
        RuleError::TypeMismatch { pos, msg: msg.into() }
    }
}
