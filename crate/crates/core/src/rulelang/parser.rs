//! Recursive-descent parser for rule files.
//!
//! A rule's successor runs until the next rule head (`Name -->`,
//! `Name(params) -->`), annotation, attribute declaration, import, or end of
//! file, so successors may span several lines as in CGA.

use std::collections::HashSet;

use super::ast::*;
use super::error::RuleError;
use super::token::{tokenize, Token, TokenKind};
use super::Pos;

pub fn parse_rule_file(source: &str) -> Result<RuleFile, RuleError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser::new(tokens, source);
    parser.rule_file()
}

/// Parses a standalone expression (used for `--define name=value`).
pub fn parse_expression(source: &str) -> Result<Expr, RuleError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser::new(tokens, source);
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(parser.syntax(tok.pos, format!("unexpected {} after expression", tok.kind)));
    }
    Ok(expr)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    eof: Pos,
}

#[derive(Clone, Copy)]
struct ItemsCtx {
    /// Stop at `case`/`else` (inside a case branch body).
    stop_at_guard: bool,
}

impl Parser {
    fn new(toks: Vec<Token>, source: &str) -> Self {
        let line = source.lines().count().max(1) as u32;
        let col = source.lines().last().map_or(1, |l| l.chars().count() as u32 + 1);
        Parser { toks, i: 0, eof: Pos { line, col } }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.i)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.toks.get(self.i).map(|t| &t.kind)
    }

    fn kind_at(&self, n: usize) -> Option<&TokenKind> {
        self.toks.get(self.i + n).map(|t| &t.kind)
    }

    fn here(&self) -> Pos {
        self.peek().map_or(self.eof, |t| t.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.i).cloned();
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    fn syntax(&self, pos: Pos, msg: impl Into<String>) -> RuleError {
        RuleError::Syntax { pos, msg: msg.into() }
    }

    fn expect(&mut self, want: TokenKind) -> Result<Pos, RuleError> {
        match self.peek() {
            Some(t) if t.kind == want => {
                let pos = t.pos;
                self.i += 1;
                Ok(pos)
            }
            Some(t) => Err(self.syntax(t.pos, format!("expected {want}, found {}", t.kind))),
            None => Err(self.syntax(self.eof, format!("expected {want}, found end of file"))),
        }
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek_kind(), Some(TokenKind::Ident(s)) if s == word)
    }

    /// True when the cursor sits on something that starts a new top-level
    /// declaration rather than continuing a successor.
    fn at_declaration(&self) -> bool {
        match self.peek_kind() {
            None => true,
            Some(TokenKind::Annotation { .. }) => true,
            Some(TokenKind::Ident(name)) => {
                if name == "import" && matches!(self.kind_at(1), Some(TokenKind::Str(_))) {
                    return true;
                }
                match self.kind_at(1) {
                    Some(TokenKind::Arrow) | Some(TokenKind::Assign) => true,
                    Some(TokenKind::LParen) => {
                        let mut depth = 0usize;
                        let mut j = self.i + 1;
                        while let Some(t) = self.toks.get(j) {
                            match t.kind {
                                TokenKind::LParen => depth += 1,
                                TokenKind::RParen => {
                                    depth -= 1;
                                    if depth == 0 {
                                        return matches!(self.toks.get(j + 1).map(|t| &t.kind), Some(TokenKind::Arrow));
                                    }
                                }
                                _ => {}
                            }
                            j += 1;
                        }
                        false
                    }
                    _ => false,
                }
            }
            _ => false,
        }
    }

    fn rule_file(&mut self) -> Result<RuleFile, RuleError> {
        let mut file = RuleFile::default();
        let mut pending: Vec<Annotation> = Vec::new();
        let mut pending_pos = None;
        let mut seen = HashSet::new();
        let mut starts = 0usize;
        while let Some(tok) = self.peek().cloned() {
            match &tok.kind {
                TokenKind::Annotation { name, args } => {
                    self.bump();
                    pending_pos.get_or_insert(tok.pos);
                    pending.push(match (name.as_str(), args.as_slice()) {
                        ("StartRule", []) => Annotation::StartRule,
                        ("Object", [tag]) => Annotation::Object(tag.clone()),
                        ("Object", _) => return Err(self.syntax(tok.pos, "@Object takes exactly one tag argument")),
                        _ => Annotation::Other { name: name.clone(), args: args.clone() },
                    });
                }
                TokenKind::Ident(word) if word == "import" && matches!(self.kind_at(1), Some(TokenKind::Str(_))) => {
                    if !pending.is_empty() {
                        return Err(self.syntax(tok.pos, "annotation must precede a rule"));
                    }
                    self.bump();
                    if let Some(TokenKind::Str(path)) = self.bump().map(|t| t.kind) {
                        file.imports.push(path);
                    }
                }
                TokenKind::Ident(name) if matches!(self.kind_at(1), Some(TokenKind::Assign)) => {
                    if !pending.is_empty() {
                        return Err(self.syntax(tok.pos, "annotation must precede a rule"));
                    }
                    let name = name.clone();
                    self.bump();
                    self.bump();
                    let value = self.expr()?;
                    file.attributes.push(Attribute { name, value, span: Span(tok.pos) });
                }
                TokenKind::Ident(_) => {
                    let mut rule = self.rule()?;
                    rule.annotations = std::mem::take(&mut pending);
                    if let Some(p) = pending_pos.take() {
                        rule.span = Span(p.min(rule.span.0));
                    }
                    if !seen.insert(rule.name.clone()) {
                        return Err(RuleError::DuplicateRule { name: rule.name, pos: tok.pos });
                    }
                    if rule.is_start() {
                        starts += 1;
                        file.start_rule = Some(rule.name.clone());
                    }
                    file.rules.push(rule);
                }
                other => return Err(self.syntax(tok.pos, format!("expected a rule or attribute, found {other}"))),
            }
        }
        if !pending.is_empty() {
            return Err(self.syntax(self.eof, "annotation at end of file is not attached to a rule"));
        }
        if starts > 1 {
            return Err(RuleError::MultipleStartRules { count: starts });
        }
        Ok(file)
    }

    fn rule(&mut self) -> Result<Rule, RuleError> {
        let tok = self.bump().expect("caller checked");
        let TokenKind::Ident(name) = tok.kind else { unreachable!() };
        let mut params = Vec::new();
        if self.peek_kind() == Some(&TokenKind::LParen) {
            self.bump();
            if self.peek_kind() != Some(&TokenKind::RParen) {
                loop {
                    match self.bump() {
                        Some(Token { kind: TokenKind::Ident(p), .. }) => {
                            if params.contains(&p) {
                                return Err(RuleError::DuplicateParam { rule: name, param: p });
                            }
                            params.push(p)
                        }
                        Some(t) => return Err(self.syntax(t.pos, format!("expected parameter name, found {}", t.kind))),
                        None => return Err(self.syntax(self.eof, "unterminated parameter list")),
                    }
                    if self.peek_kind() == Some(&TokenKind::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(TokenKind::RParen)?;
        }
        self.expect(TokenKind::Arrow)?;
        let successor = self.items(ItemsCtx { stop_at_guard: false })?;
        if let Some(t) = self.peek() {
            if !self.at_declaration() {
                return Err(self.syntax(t.pos, format!("unexpected {} in successor of `{name}`", t.kind)));
            }
        }
        Ok(Rule { name, params, annotations: Vec::new(), successor, span: Span(tok.pos) })
    }

    fn items(&mut self, ctx: ItemsCtx) -> Result<Vec<SuccessorItem>, RuleError> {
        let mut out = Vec::new();
        loop {
            if self.at_declaration() {
                break;
            }
            let tok = self.peek().cloned().expect("not at end");
            match &tok.kind {
                TokenKind::RBracket | TokenKind::RBrace | TokenKind::Pipe => break,
                TokenKind::Ident(w) if w == "case" || w == "else" => {
                    if ctx.stop_at_guard {
                        break;
                    }
                    out.push(SuccessorItem::Cases(self.cases()?));
                }
                TokenKind::LBracket => {
                    self.bump();
                    let inner = self.items(ItemsCtx { stop_at_guard: false })?;
                    self.expect(TokenKind::RBracket)?;
                    out.push(SuccessorItem::Group(inner));
                }
                TokenKind::Ellipsis => {
                    self.bump();
                    out.push(SuccessorItem::Group(Vec::new()));
                }
                TokenKind::Ident(_) => out.push(self.call_item()?),
                other => return Err(self.syntax(tok.pos, format!("unexpected {other} in successor"))),
            }
        }
        Ok(out)
    }

    fn cases(&mut self) -> Result<Vec<CaseBranch>, RuleError> {
        let mut branches = Vec::new();
        loop {
            if self.at_ident("case") {
                self.bump();
                let condition = self.expr()?;
                self.expect(TokenKind::Colon)?;
                let body = self.items(ItemsCtx { stop_at_guard: true })?;
                branches.push(CaseBranch { condition: Some(condition), body });
            } else if self.at_ident("else") {
                let pos = self.here();
                self.bump();
                if branches.is_empty() {
                    return Err(self.syntax(pos, "`else` without preceding `case`"));
                }
                self.expect(TokenKind::Colon)?;
                let body = self.items(ItemsCtx { stop_at_guard: false })?;
                branches.push(CaseBranch { condition: None, body });
                break;
            } else {
                break;
            }
        }
        Ok(branches)
    }

    fn call_item(&mut self) -> Result<SuccessorItem, RuleError> {
        let tok = self.bump().expect("caller checked");
        let TokenKind::Ident(name) = tok.kind else { unreachable!() };
        let mut args = Vec::new();
        if self.peek_kind() == Some(&TokenKind::LParen) {
            args = self.call_args()?;
        }
        let mut selectors = None;
        if self.peek_kind() == Some(&TokenKind::LBrace) {
            selectors = Some(self.selector_block()?);
        }
        let span = Span(tok.pos);
        let is_rule = selectors.is_none() && name != "NIL" && name.chars().next().is_some_and(char::is_uppercase);
        Ok(if is_rule { SuccessorItem::RuleCall { name, args, span } } else { SuccessorItem::OpCall { name, args, selectors, span } })
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, RuleError> {
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if self.peek_kind() == Some(&TokenKind::RParen) {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek_kind() {
                Some(TokenKind::Comma) => {
                    self.bump();
                }
                _ => break,
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(args)
    }

    fn selector_block(&mut self) -> Result<SelectorBlock, RuleError> {
        self.expect(TokenKind::LBrace)?;
        let mut entries = Vec::new();
        loop {
            if self.peek_kind() == Some(&TokenKind::RBrace) {
                break;
            }
            let key = self.expr()?;
            self.expect(TokenKind::Colon)?;
            let successor = self.items(ItemsCtx { stop_at_guard: false })?;
            entries.push(SelectorEntry { key, successor });
            match self.peek_kind() {
                Some(TokenKind::Pipe) => {
                    self.bump();
                }
                _ => break,
            }
        }
        self.expect(TokenKind::RBrace)?;
        let repeat = if self.peek_kind() == Some(&TokenKind::Star) {
            self.bump();
            true
        } else {
            false
        };
        Ok(SelectorBlock { entries, repeat })
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, RuleError> {
        self.binary(0)
    }

    fn binop_at(&self, level: usize) -> Option<BinOp> {
        let k = self.peek_kind()?;
        let op = match (level, k) {
            (0, TokenKind::OrOr) => BinOp::Or,
            (1, TokenKind::AndAnd) => BinOp::And,
            (2, TokenKind::EqEq) => BinOp::Eq,
            (2, TokenKind::Ne) => BinOp::Ne,
            (3, TokenKind::Lt) => BinOp::Lt,
            (3, TokenKind::Le) => BinOp::Le,
            (3, TokenKind::Gt) => BinOp::Gt,
            (3, TokenKind::Ge) => BinOp::Ge,
            (4, TokenKind::Plus) => BinOp::Add,
            (4, TokenKind::Minus) => BinOp::Sub,
            (5, TokenKind::Star) => BinOp::Mul,
            (5, TokenKind::Slash) => BinOp::Div,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, RuleError> {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop_at(level) {
            let pos = self.here();
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, RuleError> {
        let pos = self.here();
        let op = match self.peek_kind() {
            Some(TokenKind::Minus) => Some(UnOp::Neg),
            Some(TokenKind::Bang) => Some(UnOp::Not),
            Some(TokenKind::Tilde) => Some(UnOp::Floating),
            Some(TokenKind::Quote) => Some(UnOp::Relative),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary { op, expr: Box::new(inner) }, pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, RuleError> {
        let Some(tok) = self.bump() else {
            return Err(self.syntax(self.eof, "expected expression, found end of file"));
        };
        let pos = tok.pos;
        let kind = match tok.kind {
            TokenKind::Number { value, unit } => ExprKind::Number { value, unit },
            TokenKind::Str(s) => ExprKind::Str(s),
            TokenKind::Ident(name) => match name.as_str() {
                "true" => ExprKind::Bool(true),
                "false" => ExprKind::Bool(false),
                _ if self.peek_kind() == Some(&TokenKind::LParen) => {
                    let args = self.call_args()?;
                    ExprKind::Call { name, args }
                }
                _ => ExprKind::Var(name),
            },
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(inner);
            }
            other => return Err(self.syntax(pos, format!("expected expression, found {other}"))),
        };
        Ok(Expr::new(kind, pos))
    }
}
