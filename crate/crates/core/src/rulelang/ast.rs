//! Syntax tree for rule files.
//!
//! Nodes carry a [`Span`] for diagnostics. Spans never take part in equality,
//! so two trees compare equal when they are structurally the same.

use std::fmt;

use super::token::TimeUnit;
use super::Pos;

/// Source position attached to a syntax node; always compares equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span(pub Pos);

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleFile {
    pub attributes: Vec<Attribute>,
    pub rules: Vec<Rule>,
    pub imports: Vec<String>,
    /// Name of the rule annotated with `@StartRule`, if any.
    pub start_rule: Option<String>,
}

impl RuleFile {
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Annotation {
    StartRule,
    /// `@Object("tag")`: the rule's production is a separate tagged entity.
    Object(String),
    Other {
        name: String,
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub params: Vec<String>,
    pub annotations: Vec<Annotation>,
    pub successor: Vec<SuccessorItem>,
    pub span: Span,
}

impl Rule {
    pub fn object_tag(&self) -> Option<&str> {
        self.annotations.iter().find_map(|a| match a {
            Annotation::Object(tag) => Some(tag.as_str()),
            _ => None,
        })
    }

    pub fn is_start(&self) -> bool {
        self.annotations.contains(&Annotation::StartRule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SuccessorItem {
    RuleCall {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
    OpCall {
        name: String,
        args: Vec<Expr>,
        selectors: Option<SelectorBlock>,
        span: Span,
    },
    /// A `case ...: ... case ...: ... else: ...` chain. Only the first branch
    /// whose condition holds runs; a branch without condition is the `else`.
    Cases(Vec<CaseBranch>),
    /// `[ ... ]`: runs its items on a pushed copy of the current state.
    Group(Vec<SuccessorItem>),
}

impl SuccessorItem {
    pub fn name(&self) -> Option<&str> {
        match self {
            SuccessorItem::RuleCall { name, .. } | SuccessorItem::OpCall { name, .. } => Some(name),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseBranch {
    /// `None` for `else`.
    pub condition: Option<Expr>,
    pub body: Vec<SuccessorItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorBlock {
    pub entries: Vec<SelectorEntry>,
    /// Trailing `*` (repeat split).
    pub repeat: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorEntry {
    pub key: Expr,
    pub successor: Vec<SuccessorItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
    /// `~x`: floating (relative-weight) size in a split.
    Floating,
    /// `'x`: fraction of the current scope extent.
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    /// Value in seconds when `unit` is set.
    Number {
        value: f64,
        unit: Option<TimeUnit>,
    },
    Str(String),
    Bool(bool),
    Var(String),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnOp,
        expr: Box<Expr>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, span: Span(pos) }
    }

    pub fn pos(&self) -> Pos {
        self.span.0
    }

    /// Identifier-like reading of an argument: `VisitPark`, `"VisitPark"`.
    pub fn as_symbol(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var(name) => Some(name),
            ExprKind::Str(s) => Some(s),
            _ => None,
        }
    }
}
