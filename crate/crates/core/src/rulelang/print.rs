//! Canonical source printer.
//!
//! Output re-parses to a structurally equal tree. Binary subexpressions are
//! always parenthesized, so the printer never has to reason about precedence.

use std::fmt::Write;

use super::ast::*;

pub fn print_rule_file(file: &RuleFile) -> String {
    let mut out = String::new();
    for path in &file.imports {
        let _ = writeln!(out, "import {}", quote(path));
    }
    if !file.imports.is_empty() {
        out.push('\n');
    }
    for attr in &file.attributes {
        let _ = writeln!(out, "{} = {}", attr.name, print_expr(&attr.value));
    }
    if !file.attributes.is_empty() {
        out.push('\n');
    }
    for rule in &file.rules {
        for ann in &rule.annotations {
            match ann {
                Annotation::StartRule => out.push_str("@StartRule\n"),
                Annotation::Object(tag) => {
                    let _ = writeln!(out, "@Object({})", quote(tag));
                }
                Annotation::Other { name, args } => {
                    out.push('@');
                    out.push_str(name);
                    if !args.is_empty() {
                        let args: Vec<String> = args.iter().map(|a| quote(a)).collect();
                        let _ = write!(out, "({})", args.join(", "));
                    }
                    out.push('\n');
                }
            }
        }
        out.push_str(&rule.name);
        if !rule.params.is_empty() {
            let _ = write!(out, "({})", rule.params.join(", "));
        }
        out.push_str(" -->");
        for item in &rule.successor {
            out.push_str("\n    ");
            print_item(&mut out, item);
        }
        out.push_str("\n\n");
    }
    out
}

fn print_items(out: &mut String, items: &[SuccessorItem]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        print_item(out, item);
    }
}

fn print_item(out: &mut String, item: &SuccessorItem) {
    match item {
        SuccessorItem::RuleCall { name, args, .. } => {
            out.push_str(name);
            if !args.is_empty() {
                print_args(out, args);
            }
        }
        SuccessorItem::OpCall { name, args, selectors, .. } => {
            out.push_str(name);
            if !args.is_empty() {
                print_args(out, args);
            }
            if let Some(block) = selectors {
                out.push_str(" { ");
                for (i, entry) in block.entries.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" | ");
                    }
                    out.push_str(&print_expr(&entry.key));
                    out.push_str(": ");
                    print_items(out, &entry.successor);
                }
                out.push_str(" }");
                if block.repeat {
                    out.push('*');
                }
            }
        }
        SuccessorItem::Cases(branches) => {
            for (i, branch) in branches.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                match &branch.condition {
                    Some(c) => {
                        out.push_str("case ");
                        out.push_str(&print_expr(c));
                        out.push(':');
                    }
                    None => out.push_str("else:"),
                }
                if !branch.body.is_empty() {
                    out.push(' ');
                    print_items(out, &branch.body);
                }
            }
        }
        SuccessorItem::Group(items) => {
            out.push_str("[ ");
            print_items(out, items);
            out.push_str(" ]");
        }
    }
}

fn print_args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&print_expr(a));
    }
    out.push(')');
}

pub fn print_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr);
    out
}

fn write_expr(out: &mut String, expr: &Expr) {
    match &expr.kind {
        ExprKind::Number { value, unit } => match unit {
            Some(u) => match unit_literal(*value, u.seconds()) {
                Some(lit) => {
                    let _ = write!(out, "{lit}{}", u.suffix());
                }
                None => {
                    let _ = write!(out, "{value}s");
                }
            },
            None => {
                let _ = write!(out, "{value}");
            }
        },
        ExprKind::Str(s) => out.push_str(&quote(s)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::Binary { op, lhs, rhs } => {
            out.push('(');
            write_expr(out, lhs);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs);
            out.push(')');
        }
        ExprKind::Unary { op, expr: inner } => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
                UnOp::Floating => '~',
                UnOp::Relative => '\'',
            });
            if matches!(inner.kind, ExprKind::Unary { .. }) {
                out.push('(');
                write_expr(out, inner);
                out.push(')');
            } else {
                write_expr(out, inner);
            }
        }
        ExprKind::Call { name, args } => {
            out.push_str(name);
            print_args(out, args);
        }
    }
}

/// Finds a literal that the lexer scales back to exactly `value`.
fn unit_literal(value: f64, scale: f64) -> Option<f64> {
    let guess = value / scale;
    [0i64, -1, 1, -2, 2, -3, 3, -4, 4]
        .into_iter()
        .map(|d| f64::from_bits((guess.to_bits() as i64 + d) as u64))
        .find(|lit| lit * scale == value)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_expression, parse_rule_file};
    use super::*;
    use proptest::prelude::*;

    fn fixpoint(src: &str) {
        let first = parse_rule_file(src).unwrap();
        let printed = print_rule_file(&first);
        let second = parse_rule_file(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(first, second, "{printed}");
    }

    #[test]
    fn reference_files_round_trip() {
        fixpoint(include_str!("../../assets/shop_park.cga"));
        fixpoint(include_str!("../../assets/weekday_original.pcg"));
        fixpoint(include_str!("../../assets/weekday.pcg"));
        fixpoint(include_str!("../../assets/structured.cga"));
    }

    #[test]
    fn odd_constructs_round_trip() {
        fixpoint("import \"a.pcg\"\nx = -(-3) y = \"q\\\"t\"\n@Object(\"b\") @Tag(\"1\")\nR(a) --> [ ] ... f() { 'x: | ~1: A(1) }* case !a: else: case b: c else: NIL");
        fixpoint("R --> t('0.5, 0, 0) split(x) { 0.1h: A | 90s: B }");
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| n.to_string()),
            (0u32..100, prop_oneof![Just("h"), Just("m"), Just("s"), Just("")]).prop_map(|(n, u)| format!("{n}{u}")),
            prop_oneof![Just("age"), Just("home"), Just("person.id"), Just("true"), Just("\"s\"")].prop_map(String::from),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (
                    inner.clone(),
                    prop_oneof![Just("+"), Just("-"), Just("*"), Just("/"), Just("<"), Just("=="), Just("&&"), Just("||"), Just(">=")],
                    inner.clone()
                )
                    .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.clone().prop_map(|a| format!("!({a})")),
                proptest::collection::vec(inner, 0..3).prop_map(|args| format!("f({})", args.join(", "))),
            ]
        })
    }

    proptest! {
        #[test]
        fn expression_print_parse_fixpoint(src in arb_expr()) {
            let e = parse_expression(&src).unwrap();
            let printed = print_expr(&e);
            let again = parse_expression(&printed).unwrap();
            prop_assert_eq!(e, again);
        }

        #[test]
        fn rule_print_parse_fixpoint(cond in arb_expr(), arg in arb_expr()) {
            let src = format!("A --> op({arg}) case {cond}: B({arg}) else: [ C ]\nB(x) --> split(x) {{ ~1: NIL | {arg}: A }}*");
            fixpoint(&src);
        }
    }
}
