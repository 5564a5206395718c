//! Expression values and evaluation.
//!
//! The evaluator knows the operators; everything else (variables, functions,
//! which function parameters are predicates) comes from an [`Environment`].
//! Predicate arguments are handed to the function unevaluated.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, ExprKind, UnOp};
use super::error::RuleError;
use super::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Building,
    Object,
    Zone,
    Person,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityRef {
    pub kind: EntityKind,
    pub id: u32,
}

impl EntityRef {
    pub fn building(id: u32) -> Self {
        EntityRef { kind: EntityKind::Building, id }
    }
    pub fn object(id: u32) -> Self {
        EntityRef { kind: EntityKind::Object, id }
    }
    pub fn zone(id: u32) -> Self {
        EntityRef { kind: EntityKind::Zone, id }
    }
    pub fn person(id: u32) -> Self {
        EntityRef { kind: EntityKind::Person, id }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Value {
    Number(f64),
    Bool(bool),
    Text(String),
    Entity(EntityRef),
    Invalid,
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Entity(a), Value::Entity(b)) => a == b,
            (Value::Invalid, Value::Invalid) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Entity(e) => write!(f, "{}#{}", e.kind.name(), e.id),
            Value::Invalid => f.write_str("invalid"),
        }
    }
}

impl EntityKind {
    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Building => "building",
            EntityKind::Object => "object",
            EntityKind::Zone => "zone",
            EntityKind::Person => "person",
        }
    }
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Bool(_) => "bool",
            Value::Text(_) => "text",
            Value::Entity(e) => e.kind.name(),
            Value::Invalid => "invalid",
        }
    }

    pub fn is_valid(&self) -> bool {
        !matches!(self, Value::Invalid)
    }

    pub fn as_number(&self, pos: Pos, what: &str) -> Result<f64, RuleError> {
        match self {
            Value::Number(n) => Ok(*n),
            v => Err(RuleError::mismatch(pos, format!("{what} must be a number, got {}", v.type_name()))),
        }
    }

    pub fn as_bool(&self, pos: Pos, what: &str) -> Result<bool, RuleError> {
        match self {
            Value::Bool(b) => Ok(*b),
            v => Err(RuleError::mismatch(pos, format!("{what} must be a bool, got {}", v.type_name()))),
        }
    }

    pub fn as_text(&self, pos: Pos, what: &str) -> Result<&str, RuleError> {
        match self {
            Value::Text(s) => Ok(s),
            v => Err(RuleError::mismatch(pos, format!("{what} must be text, got {}", v.type_name()))),
        }
    }

    /// Entity of the given kind; `Ok(None)` for Invalid.
    pub fn as_entity(&self, kind: EntityKind, pos: Pos, what: &str) -> Result<Option<u32>, RuleError> {
        match self {
            Value::Entity(e) if e.kind == kind => Ok(Some(e.id)),
            Value::Invalid => Ok(None),
            v => Err(RuleError::mismatch(pos, format!("{what} must be a {} id, got {}", kind.name(), v.type_name()))),
        }
    }
}

/// Arity and predicate parameters of a function.
#[derive(Debug, Clone, Copy)]
pub struct Signature {
    pub min_args: usize,
    pub max_args: usize,
    /// Indices of parameters that receive the unevaluated expression.
    pub lazy: &'static [usize],
}

impl Signature {
    pub const fn strict(min_args: usize, max_args: usize) -> Self {
        Signature { min_args, max_args, lazy: &[] }
    }
}

pub enum Arg<'a> {
    Value(Value),
    Lazy(&'a Expr),
}

impl Arg<'_> {
    /// The evaluated value of a strict argument.
    pub fn value(&self) -> &Value {
        match self {
            Arg::Value(v) => v,
            Arg::Lazy(_) => panic!("lazy argument used as value"),
        }
    }
}

pub trait Environment {
    fn variable(&self, name: &str) -> Option<Value>;
    fn signature(&self, name: &str) -> Option<Signature>;
    fn call(&mut self, name: &str, args: Vec<Arg<'_>>, pos: Pos) -> Result<Value, RuleError>;
}

pub fn evaluate<E: Environment + ?Sized>(expr: &Expr, env: &mut E) -> Result<Value, RuleError> {
    let pos = expr.pos();
    match &expr.kind {
        ExprKind::Number { value, .. } => Ok(Value::Number(*value)),
        ExprKind::Str(s) => Ok(Value::Text(s.clone())),
        ExprKind::Bool(b) => Ok(Value::Bool(*b)),
        ExprKind::Var(name) => env.variable(name).ok_or_else(|| RuleError::UnknownVariable { name: name.clone(), pos }),
        ExprKind::Unary { op, expr: inner } => {
            let v = evaluate(inner, env)?;
            match (op, v) {
                (UnOp::Neg, Value::Number(n)) => Ok(Value::Number(-n)),
                (UnOp::Neg, Value::Invalid) => Ok(Value::Invalid),
                (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                (UnOp::Floating | UnOp::Relative, _) => {
                    Err(RuleError::runtime(pos, "`~` and `'` sizes are only allowed in split and t arguments"))
                }
                (op, v) => Err(RuleError::mismatch(
                    pos,
                    format!("cannot apply `{}` to {}", if *op == UnOp::Neg { "-" } else { "!" }, v.type_name()),
                )),
            }
        }
        ExprKind::Binary { op, lhs, rhs } => binary(*op, lhs, rhs, pos, env),
        ExprKind::Call { name, args } => {
            let sig = env.signature(name).ok_or_else(|| RuleError::UnknownFunction { name: name.clone(), pos })?;
            if args.len() < sig.min_args || args.len() > sig.max_args {
                let want =
                    if sig.min_args == sig.max_args { sig.min_args.to_string() } else { format!("{} to {}", sig.min_args, sig.max_args) };
                return Err(RuleError::runtime(pos, format!("`{name}` takes {want} argument(s), got {}", args.len())));
            }
            let mut values = Vec::with_capacity(args.len());
            for (i, a) in args.iter().enumerate() {
                if sig.lazy.contains(&i) {
                    values.push(Arg::Lazy(a));
                } else {
                    values.push(Arg::Value(evaluate(a, env)?));
                }
            }
            env.call(name, values, pos)
        }
    }
}

fn binary<E: Environment + ?Sized>(op: BinOp, lhs: &Expr, rhs: &Expr, pos: Pos, env: &mut E) -> Result<Value, RuleError> {
    if matches!(op, BinOp::And | BinOp::Or) {
        let l = evaluate(lhs, env)?.as_bool(lhs.pos(), "operand of logical operator")?;
        if (op == BinOp::And && !l) || (op == BinOp::Or && l) {
            return Ok(Value::Bool(l));
        }
        let r = evaluate(rhs, env)?.as_bool(rhs.pos(), "operand of logical operator")?;
        return Ok(Value::Bool(r));
    }
    let l = evaluate(lhs, env)?;
    let r = evaluate(rhs, env)?;
    match op {
        BinOp::Eq => return Ok(Value::Bool(l == r)),
        BinOp::Ne => return Ok(Value::Bool(l != r)),
        _ => {}
    }
    let mismatch = |l: &Value, r: &Value| {
        RuleError::mismatch(pos, format!("cannot apply `{}` to {} and {}", op.symbol(), l.type_name(), r.type_name()))
    };
    match (&l, &r) {
        (Value::Number(a), Value::Number(b)) => Ok(match op {
            BinOp::Add => Value::Number(a + b),
            BinOp::Sub => Value::Number(a - b),
            BinOp::Mul => Value::Number(a * b),
            BinOp::Div if *b == 0.0 => Value::Invalid,
            BinOp::Div => Value::Number(a / b),
            BinOp::Lt => Value::Bool(a < b),
            BinOp::Le => Value::Bool(a <= b),
            BinOp::Gt => Value::Bool(a > b),
            BinOp::Ge => Value::Bool(a >= b),
            _ => unreachable!(),
        }),
        (Value::Text(a), Value::Text(b)) if op == BinOp::Add => Ok(Value::Text(format!("{a}{b}"))),
        (Value::Invalid, Value::Number(_) | Value::Invalid) | (Value::Number(_), Value::Invalid) => Ok(match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => Value::Invalid,
            _ => Value::Bool(false),
        }),
        _ => Err(mismatch(&l, &r)),
    }
}

/// Uniform draw in `[lo, hi)`; `lo` when the range is empty.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        lo + (hi - lo) * rng.gen::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::super::parser::parse_expression;
    use super::*;
    use crate::rng::{seeded, StreamRng};

    struct TestEnv {
        vars: HashMap<String, Value>,
        ages: Vec<f64>,
        focus: Option<usize>,
        rng: StreamRng,
    }

    impl TestEnv {
        fn new() -> Self {
            TestEnv { vars: HashMap::new(), ages: vec![40.0, 7.0], focus: None, rng: seeded(1) }
        }
    }

    impl Environment for TestEnv {
        fn variable(&self, name: &str) -> Option<Value> {
            if name == "age" {
                return self.focus.map(|i| Value::Number(self.ages[i]));
            }
            self.vars.get(name).cloned()
        }

        fn signature(&self, name: &str) -> Option<Signature> {
            match name {
                "count" => Some(Signature { min_args: 0, max_args: 1, lazy: &[0] }),
                "rand" => Some(Signature::strict(2, 2)),
                "isValid" => Some(Signature::strict(1, 1)),
                _ => None,
            }
        }

        fn call(&mut self, name: &str, args: Vec<Arg<'_>>, pos: Pos) -> Result<Value, RuleError> {
            match name {
                "count" => {
                    let Some(Arg::Lazy(pred)) = args.first() else {
                        return Ok(Value::Number(self.ages.len() as f64));
                    };
                    let saved = self.focus;
                    let mut n = 0;
                    for i in 0..self.ages.len() {
                        self.focus = Some(i);
                        let hit = evaluate(pred, self);
                        self.focus = saved;
                        if hit?.as_bool(pos, "predicate")? {
                            n += 1;
                        }
                    }
                    Ok(Value::Number(n as f64))
                }
                "rand" => {
                    let lo = args[0].value().as_number(pos, "lo")?;
                    let hi = args[1].value().as_number(pos, "hi")?;
                    Ok(Value::Number(uniform(&mut self.rng, lo, hi)))
                }
                "isValid" => Ok(Value::Bool(args[0].value().is_valid())),
                _ => unreachable!(),
            }
        }
    }

    fn eval(src: &str, env: &mut TestEnv) -> Result<Value, RuleError> {
        evaluate(&parse_expression(src).unwrap(), env)
    }

    #[test]
    fn lazy_predicates_run_per_member() {
        let mut env = TestEnv::new();
        assert_eq!(eval("count(age < 18)", &mut env), Ok(Value::Number(1.0)));
        assert_eq!(eval("count()", &mut env), Ok(Value::Number(2.0)));
        assert_eq!(eval("count(false)", &mut env), Ok(Value::Number(0.0)));
        // the predicate is not evaluated at call time: age is unbound outside count
        assert!(matches!(eval("age", &mut env), Err(RuleError::UnknownVariable { .. })));
    }

    #[test]
    fn lazy_unknown_variable_errors_only_inside_receiver() {
        let mut env = TestEnv::new();
        env.ages.clear();
        assert_eq!(eval("count(nonsense > 1)", &mut env), Ok(Value::Number(0.0)));
        env.ages.push(3.0);
        assert!(matches!(eval("count(nonsense > 1)", &mut env), Err(RuleError::UnknownVariable { .. })));
    }

    #[test]
    fn time_arithmetic_and_rand_bounds() {
        let mut env = TestEnv::new();
        env.vars.insert("workStart".into(), Value::Number(28800.0));
        for _ in 0..10_000 {
            let Value::Number(v) = eval("workStart + rand(-5m, 5m)", &mut env).unwrap() else { panic!() };
            assert!((28500.0..29100.0).contains(&v), "{v}");
        }
        assert_eq!(eval("rand(0, 0)", &mut env), Ok(Value::Number(0.0)));
        assert_eq!(eval("1h + 30m + 5s", &mut env), Ok(Value::Number(5405.0)));
    }

    #[test]
    fn same_stream_position_same_value() {
        let mut a = TestEnv::new();
        let mut b = TestEnv::new();
        assert_eq!(eval("rand(0, 100)", &mut a), eval("rand(0, 100)", &mut b));
    }

    #[test]
    fn invalid_semantics() {
        let mut env = TestEnv::new();
        env.vars.insert("nothing".into(), Value::Invalid);
        env.vars.insert("b".into(), Value::Entity(EntityRef::building(0)));
        assert_eq!(eval("1 / 0", &mut env), Ok(Value::Invalid));
        assert_eq!(eval("isValid(1 / 0)", &mut env), Ok(Value::Bool(false)));
        assert_eq!(eval("nothing == nothing", &mut env), Ok(Value::Bool(true)));
        assert_eq!(eval("nothing == b", &mut env), Ok(Value::Bool(false)));
        assert_eq!(eval("nothing == 0", &mut env), Ok(Value::Bool(false)));
        assert_eq!(eval("b == b", &mut env), Ok(Value::Bool(true)));
        assert_eq!(eval("nothing + 1", &mut env), Ok(Value::Invalid));
    }

    #[test]
    fn type_errors_carry_position() {
        let mut env = TestEnv::new();
        let err = eval("1 +\n \"x\"", &mut env).unwrap_err();
        assert!(matches!(err, RuleError::TypeMismatch { pos: Pos { line: 1, col: 3 }, .. }), "{err}");
        assert!(matches!(eval("nope(1)", &mut env), Err(RuleError::UnknownFunction { .. })));
        assert!(matches!(eval("1 && true", &mut env), Err(RuleError::TypeMismatch { .. })));
        assert!(matches!(eval("rand(1)", &mut env), Err(RuleError::Runtime { .. })));
        assert_eq!(eval("\"a\" + \"b\"", &mut env), Ok(Value::Text("ab".into())));
    }

    #[test]
    fn short_circuit() {
        let mut env = TestEnv::new();
        assert_eq!(eval("false && undefined", &mut env), Ok(Value::Bool(false)));
        assert_eq!(eval("true || undefined", &mut env), Ok(Value::Bool(true)));
    }
}
