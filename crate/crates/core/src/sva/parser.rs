//! Recursive-descent parser for the assertion subset.
//!
//! Stops at the first syntax error. Name resolution is lint level: a bare
//! property reference with no matching declaration, an unknown system
//! function or (when a signal list is supplied) an unknown identifier only
//! produce warnings.

use std::collections::HashSet;

use super::ast::*;
use super::diag::{codes, end_position, Diagnostic};
use super::token::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Signals that exist in the design. When set, other identifiers warn.
    pub known_identifiers: Option<HashSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    /// Present iff no error diagnostic was produced.
    pub ast: Option<SvaAst>,
    /// Errors and warnings, sorted by position.
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseOutcome {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

pub fn parse_assertion(source: &str) -> ParseOutcome {
    parse_with(source, &ParseOptions::default())
}

pub fn parse_with(source: &str, options: &ParseOptions) -> ParseOutcome {
    let tokens = tokenize(source);
    let mut diagnostics: Vec<Diagnostic> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Error)
        .map(lexical_error)
        .collect();
    if !diagnostics.is_empty() {
        return ParseOutcome { ast: None, diagnostics };
    }
    if tokens.is_empty() {
        let (line, col) = end_position(source);
        diagnostics.push(Diagnostic::error(line, col, codes::EMPTY_INPUT, "no assertion found"));
        return ParseOutcome { ast: None, diagnostics };
    }
    let mut p = Parser::new(source, tokens);
    let ast = match p.items() {
        Ok(items) => Some(SvaAst { items }),
        Err(d) => {
            diagnostics.push(d);
            None
        }
    };
    if let Some(ast) = &ast {
        diagnostics.extend(p.lint(ast, options));
    }
    diagnostics.sort_by_key(|d| (d.line, d.column, d.severity));
    ParseOutcome { ast, diagnostics }
}

fn lexical_error(t: &Token) -> Diagnostic {
    let message = if t.lexeme.starts_with("/*") {
        "unterminated block comment".to_string()
    } else if t.lexeme.starts_with('"') {
        "unterminated string literal".to_string()
    } else {
        format!("unexpected character '{}'", t.lexeme)
    };
    Diagnostic::error(t.line, t.column, codes::LEXICAL, message)
}

/// Allowed argument counts for known system functions; `None` = any.
fn system_arity(name: &str) -> Option<Option<(usize, usize)>> {
    Some(match name {
        "$rose" | "$fell" | "$stable" | "$changed" => Some((1, 2)),
        "$past" => Some((1, 4)),
        "$onehot" | "$onehot0" | "$isunknown" | "$countones" | "$bits" | "$clog2"
        | "$sampled" | "$signed" | "$unsigned" => Some((1, 1)),
        "$time" | "$realtime" | "$stime" => Some((0, 0)),
        "$error" | "$fatal" | "$warning" | "$info" | "$display" => None,
        _ => return None,
    })
}

const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["|"],
    &["^", "~^", "^~"],
    &["&"],
    &["==", "!=", "===", "!=="],
    &["<", "<=", ">", ">="],
    &["<<", ">>", "<<<", ">>>"],
    &["+", "-"],
    &["*", "/", "%"],
];

const UNARY_OPS: &[&str] = &["!", "~", "-", "+", "&", "|", "^", "~&", "~|", "~^"];

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    /// Bare property references of assert statements: (name, line, col).
    references: Vec<(String, u32, u32)>,
    /// Identifier primaries: (name, line, col).
    idents: Vec<(String, u32, u32)>,
    /// System calls: (name, line, col).
    sys_calls: Vec<(String, u32, u32)>,
    /// Formal ports of every declaration.
    ports: HashSet<String>,
}

impl<'a> Parser<'a> {
    fn new(source: &'a str, tokens: Vec<Token>) -> Self {
        Self {
            source,
            tokens,
            pos: 0,
            references: Vec::new(),
            idents: Vec::new(),
            sys_calls: Vec::new(),
            ports: HashSet::new(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_n(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn check(&self, f: impl Fn(&Token) -> bool) -> bool {
        self.peek().is_some_and(f)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn eat(&mut self, f: impl Fn(&Token) -> bool) -> Option<Token> {
        if self.check(f) {
            Some(self.advance())
        } else {
            None
        }
    }

    fn prev_lexeme(&self) -> &str {
        self.pos.checked_sub(1).map_or("start of input", |i| self.tokens[i].lexeme.as_str())
    }

    fn here(&self) -> (u32, u32) {
        match self.peek() {
            Some(t) => (t.line, t.column),
            None => end_position(self.source),
        }
    }

    fn expected(&self, what: &str) -> Diagnostic {
        let (line, col) = self.here();
        match self.peek() {
            Some(t) => Diagnostic::error(
                line,
                col,
                codes::EXPECTED_TOKEN,
                format!("expected {what}, found '{}'", t.lexeme),
            ),
            None => Diagnostic::error(
                line,
                col,
                codes::UNEXPECTED_EOF,
                format!("unexpected end of input, expected {what}"),
            ),
        }
    }

    fn expected_expression(&self) -> Diagnostic {
        let (line, col) = self.here();
        Diagnostic::error(
            line,
            col,
            codes::EXPECTED_EXPRESSION,
            format!("expected expression after {}", self.prev_lexeme()),
        )
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        self.eat(|t| t.is_punct(p)).ok_or_else(|| self.expected(&format!("'{p}'")))
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Token> {
        self.eat(|t| t.is_kw(kw)).ok_or_else(|| self.expected(&format!("'{kw}'")))
    }

    fn expect_ident(&mut self, what: &str) -> PResult<Token> {
        self.eat(|t| t.kind == TokenKind::Ident).ok_or_else(|| self.expected(what))
    }

    fn expect_number(&mut self, what: &str) -> PResult<String> {
        self.eat(|t| t.kind == TokenKind::Number)
            .map(|t| t.lexeme)
            .ok_or_else(|| self.expected(what))
    }

    // ---- top level ----------------------------------------------------

    fn items(&mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        while let Some(t) = self.peek() {
            let is_label = t.kind == TokenKind::Ident
                && self.peek_n(1).is_some_and(|t| t.is_punct(":"))
                && self.peek_n(2).is_some_and(is_verb);
            if t.is_kw("property") {
                items.push(Item::Property(self.property_decl()?));
            } else if is_verb(t) || is_label {
                items.push(Item::Assert(self.assert_stmt()?));
            } else {
                let t = t.clone();
                return Err(Diagnostic::error(
                    t.line,
                    t.column,
                    codes::UNEXPECTED_TOKEN,
                    format!("unexpected token '{}', expected a property declaration or assertion", t.lexeme),
                ));
            }
        }
        Ok(items)
    }

    fn property_decl(&mut self) -> PResult<PropertyDecl> {
        self.expect_kw("property")?;
        let name = self.expect_ident("property name")?.lexeme;
        let ports = if self.eat(|t| t.is_punct("(")).is_some() {
            let mut ports = vec![self.expect_ident("formal argument")?.lexeme];
            while self.eat(|t| t.is_punct(",")).is_some() {
                ports.push(self.expect_ident("formal argument")?.lexeme);
            }
            self.expect_punct(")")?;
            self.ports.extend(ports.iter().cloned());
            Some(ports)
        } else {
            None
        };
        self.expect_punct(";")?;
        let spec = self.property_spec()?;
        let semicolon = self.eat(|t| t.is_punct(";")).is_some();
        self.expect_kw("endproperty")?;
        let end_label = if self.eat(|t| t.is_punct(":")).is_some() {
            let label = self.expect_ident("property name after 'endproperty :'")?;
            if label.lexeme != name {
                return Err(Diagnostic::error(
                    label.line,
                    label.column,
                    codes::LABEL_MISMATCH,
                    format!("endproperty label '{}' does not match property '{name}'", label.lexeme),
                ));
            }
            Some(label.lexeme)
        } else {
            None
        };
        Ok(PropertyDecl { name, ports, spec, semicolon, end_label })
    }

    fn assert_stmt(&mut self) -> PResult<AssertStmt> {
        let label = if self.check(|t| t.kind == TokenKind::Ident) {
            let l = self.advance().lexeme;
            self.expect_punct(":")?;
            Some(l)
        } else {
            None
        };
        let verb = self.advance().lexeme;
        self.expect_kw("property")?;
        self.expect_punct("(")?;
        let spec_start = self.peek().map(|t| (t.line, t.column));
        let spec = self.property_spec()?;
        if let (Some(name), Some((line, col))) = (spec.reference(), spec_start) {
            self.references.push((name.to_string(), line, col));
        }
        self.expect_punct(")")?;
        let action = self.action_block()?;
        Ok(AssertStmt { label, verb, spec, action })
    }

    fn action_block(&mut self) -> PResult<ActionBlock> {
        if self.eat(|t| t.is_punct(";")).is_some() {
            return Ok(ActionBlock { pass: None, fail: None });
        }
        let pass = if self.check(|t| t.kind == TokenKind::SystemName) {
            let call = self.task_call()?;
            self.expect_punct(";")?;
            Some(call)
        } else {
            None
        };
        let fail = if self.eat(|t| t.is_kw("else")).is_some() {
            if !self.check(|t| t.kind == TokenKind::SystemName) {
                return Err(self.expected("system task after 'else'"));
            }
            let call = self.task_call()?;
            self.expect_punct(";")?;
            Some(call)
        } else {
            None
        };
        if pass.is_none() && fail.is_none() {
            return Err(self.expected("';'"));
        }
        Ok(ActionBlock { pass, fail })
    }

    fn task_call(&mut self) -> PResult<Expr> {
        let t = self.advance();
        self.sys_call(t)
    }

    fn property_spec(&mut self) -> PResult<PropertySpec> {
        let clocking = if self.check(|t| t.is_punct("@")) {
            Some(self.clocking_event()?)
        } else {
            None
        };
        let disable_iff = if self.eat(|t| t.is_kw("disable")).is_some() {
            self.expect_kw("iff")?;
            self.expect_punct("(")?;
            let e = self.expr()?;
            self.expect_punct(")")?;
            Some(e)
        } else {
            None
        };
        let body = self.property()?;
        Ok(PropertySpec { clocking, disable_iff, body })
    }

    fn clocking_event(&mut self) -> PResult<ClockingEvent> {
        self.expect_punct("@")?;
        if self.eat(|t| t.is_punct("(")).is_none() {
            let id = self.expect_ident("clock signal or '(' after '@'")?;
            self.idents.push((id.lexeme.clone(), id.line, id.column));
            return Ok(ClockingEvent {
                parenthesized: false,
                terms: vec![EventTerm { edge: None, expr: Expr::Ident(id.lexeme) }],
                separators: Vec::new(),
            });
        }
        let mut terms = vec![self.event_term()?];
        let mut separators = Vec::new();
        while let Some(sep) = self.eat(|t| t.is_kw("or") || t.is_punct(",")) {
            separators.push(sep.lexeme);
            terms.push(self.event_term()?);
        }
        self.expect_punct(")")?;
        Ok(ClockingEvent { parenthesized: true, terms, separators })
    }

    fn event_term(&mut self) -> PResult<EventTerm> {
        let edge = self
            .eat(|t| t.is_kw("posedge") || t.is_kw("negedge") || t.is_kw("edge"))
            .map(|t| t.lexeme);
        let expr = self.expr()?;
        Ok(EventTerm { edge, expr })
    }

    // ---- property / sequence level --------------------------------------

    fn property(&mut self) -> PResult<Expr> {
        let lhs = self.prop_or()?;
        if let Some(op) = self.eat(|t| t.is_op("|->") || t.is_op("|=>")) {
            let rhs = self.property()?;
            return Ok(Expr::Binary { op: op.lexeme, lhs: Box::new(lhs), rhs: Box::new(rhs) });
        }
        Ok(lhs)
    }

    fn prop_or(&mut self) -> PResult<Expr> {
        let mut lhs = self.prop_and()?;
        while let Some(op) = self.eat(|t| t.is_kw("or")) {
            let rhs = self.prop_and()?;
            lhs = Expr::Binary { op: op.lexeme, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn prop_and(&mut self) -> PResult<Expr> {
        let mut lhs = self.prop_not()?;
        while let Some(op) = self.eat(|t| t.is_kw("and")) {
            let rhs = self.prop_not()?;
            lhs = Expr::Binary { op: op.lexeme, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn prop_not(&mut self) -> PResult<Expr> {
        if let Some(op) = self.eat(|t| t.is_kw("not")) {
            let operand = self.prop_not()?;
            return Ok(Expr::Unary { op: op.lexeme, operand: Box::new(operand) });
        }
        self.seq_binary()
    }

    fn seq_binary(&mut self) -> PResult<Expr> {
        let mut lhs = self.sequence()?;
        while let Some(op) =
            self.eat(|t| t.is_kw("intersect") || t.is_kw("within") || t.is_kw("throughout"))
        {
            let rhs = self.sequence()?;
            lhs = Expr::Binary { op: op.lexeme, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn sequence(&mut self) -> PResult<Expr> {
        let mut lhs = if self.check(|t| t.is_op("##")) {
            let delay = self.cycle_delay()?;
            let rhs = self.repetition()?;
            Expr::Delay { lhs: None, delay, rhs: Box::new(rhs) }
        } else {
            self.repetition()?
        };
        while self.check(|t| t.is_op("##")) {
            let delay = self.cycle_delay()?;
            let rhs = self.repetition()?;
            lhs = Expr::Delay { lhs: Some(Box::new(lhs)), delay, rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn cycle_delay(&mut self) -> PResult<CycleDelay> {
        self.advance();
        if let Some(n) = self.eat(|t| t.kind == TokenKind::Number) {
            return Ok(CycleDelay::Fixed(n.lexeme));
        }
        if self.eat(|t| t.is_punct("[")).is_some() {
            let lo = self.expect_number("delay lower bound")?;
            self.expect_punct(":")?;
            let hi = self.bound("delay upper bound")?;
            self.expect_punct("]")?;
            return Ok(CycleDelay::Range { lo, hi });
        }
        Err(self.expected("cycle delay after '##'"))
    }

    fn bound(&mut self, what: &str) -> PResult<Bound> {
        if self.eat(|t| t.is_punct("$")).is_some() {
            return Ok(Bound::Dollar);
        }
        Ok(Bound::Number(self.expect_number(what)?))
    }

    fn range(&mut self) -> PResult<Range> {
        let lo = self.expect_number("repetition count")?;
        let hi = if self.eat(|t| t.is_punct(":")).is_some() {
            Some(self.bound("repetition upper bound")?)
        } else {
            None
        };
        Ok(Range { lo, hi })
    }

    fn at_repetition(&self) -> bool {
        self.check(|t| t.is_punct("["))
            && self.peek_n(1).is_some_and(|t| {
                t.is_op("*") || t.is_op("=") || t.is_op("->") || t.is_op("+")
            })
    }

    fn repetition(&mut self) -> PResult<Expr> {
        let operand = self.expr()?;
        if !self.at_repetition() {
            return Ok(operand);
        }
        self.advance();
        let op = self.advance();
        let rep = match op.lexeme.as_str() {
            "*" if self.check(|t| t.is_punct("]")) => Repetition::Consecutive(None),
            "*" => Repetition::Consecutive(Some(self.range()?)),
            "+" => Repetition::Plus,
            "=" => Repetition::NonConsecutive(self.range()?),
            _ => Repetition::Goto(self.range()?),
        };
        self.expect_punct("]")?;
        Ok(Expr::Repeat { operand: Box::new(operand), rep })
    }

    // ---- expression level -------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat(|t| t.is_op("?")).is_some() {
            let then = self.expr()?;
            self.expect_punct(":")?;
            let otherwise = self.expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let ops = BINARY_LEVELS[level];
            let is_op = self.check(|t| t.kind == TokenKind::Operator && ops.contains(&t.lexeme.as_str()));
            // `+:` / `-:` belong to an enclosing part-select.
            let part_select = self.peek_n(1).is_some_and(|t| t.is_punct(":"))
                && self.check(|t| t.is_op("+") || t.is_op("-"));
            if !is_op || part_select {
                return Ok(lhs);
            }
            let op = self.advance().lexeme;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if let Some(op) =
            self.eat(|t| t.kind == TokenKind::Operator && UNARY_OPS.contains(&t.lexeme.as_str()))
        {
            let operand = self.unary()?;
            return Ok(Expr::Unary { op: op.lexeme, operand: Box::new(operand) });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.check(|t| t.is_punct("[")) && !self.at_repetition() {
                self.advance();
                let index = self.expr()?;
                let part = if self.eat(|t| t.is_punct(":")).is_some() {
                    Some((":".to_string(), Box::new(self.expr()?)))
                } else if self.check(|t| t.is_op("+") || t.is_op("-"))
                    && self.peek_n(1).is_some_and(|t| t.is_punct(":"))
                {
                    let sign = self.advance().lexeme;
                    self.advance();
                    Some((format!("{sign}:"), Box::new(self.expr()?)))
                } else {
                    None
                };
                self.expect_punct("]")?;
                e = Expr::Index { base: Box::new(e), index: Box::new(index), part };
            } else if self.eat(|t| t.is_punct(".")).is_some() {
                let field = self.expect_ident("member name after '.'")?.lexeme;
                e = Expr::Member { base: Box::new(e), field };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(t) = self.peek().cloned() else {
            return Err(self.expected_expression());
        };
        match t.kind {
            TokenKind::Ident => {
                self.advance();
                self.idents.push((t.lexeme.clone(), t.line, t.column));
                Ok(Expr::Ident(t.lexeme))
            }
            TokenKind::Number => {
                self.advance();
                Ok(Expr::Number(t.lexeme))
            }
            TokenKind::Str => {
                self.advance();
                Ok(Expr::Str(t.lexeme))
            }
            TokenKind::SystemName => {
                self.advance();
                self.sys_call(t)
            }
            TokenKind::Punct if t.lexeme == "(" => {
                self.advance();
                if self.check(|t| t.is_punct(")")) {
                    return Err(self.expected_expression());
                }
                let inner = self.property()?;
                self.expect_punct(")")?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            TokenKind::Punct if t.lexeme == "{" => {
                self.advance();
                self.concat()
            }
            _ => Err(self.expected_expression()),
        }
    }

    fn concat(&mut self) -> PResult<Expr> {
        let first = self.expr()?;
        if self.eat(|t| t.is_punct("{")).is_some() {
            let items = self.expr_list()?;
            self.expect_punct("}")?;
            self.expect_punct("}")?;
            return Ok(Expr::Replicate { count: Box::new(first), items });
        }
        let mut items = vec![first];
        while self.eat(|t| t.is_punct(",")).is_some() {
            items.push(self.expr()?);
        }
        self.expect_punct("}")?;
        Ok(Expr::Concat(items))
    }

    fn expr_list(&mut self) -> PResult<Vec<Expr>> {
        let mut items = vec![self.expr()?];
        while self.eat(|t| t.is_punct(",")).is_some() {
            items.push(self.expr()?);
        }
        Ok(items)
    }

    fn sys_call(&mut self, name: Token) -> PResult<Expr> {
        self.sys_calls.push((name.lexeme.clone(), name.line, name.column));
        let args = if self.eat(|t| t.is_punct("(")).is_some() {
            let args = if self.check(|t| t.is_punct(")")) { Vec::new() } else { self.expr_list()? };
            self.expect_punct(")")?;
            Some(args)
        } else {
            None
        };
        if let Some(Some((lo, hi))) = system_arity(&name.lexeme) {
            let n = args.as_ref().map_or(0, Vec::len);
            if n < lo || n > hi {
                let expect = if lo == hi { format!("{lo}") } else { format!("{lo} to {hi}") };
                let plural = if hi == 1 { "argument" } else { "arguments" };
                return Err(Diagnostic::error(
                    name.line,
                    name.column,
                    codes::ARITY,
                    format!("system function {} expects {expect} {plural}, found {n}", name.lexeme),
                ));
            }
        }
        Ok(Expr::SysCall { name: name.lexeme, args })
    }

    // ---- lint ---------------------------------------------------------------

    fn lint(&self, ast: &SvaAst, options: &ParseOptions) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let declared: HashSet<&str> = ast.properties().map(|p| p.name.as_str()).collect();
        let known = options.known_identifiers.as_ref();
        for (name, line, col) in &self.references {
            let is_signal = known.is_some_and(|k| k.contains(name));
            if !declared.contains(name.as_str()) && !is_signal {
                out.push(Diagnostic::warning(
                    *line,
                    *col,
                    codes::UNRESOLVED_PROPERTY,
                    format!("unresolved property reference {name}"),
                ));
            }
        }
        for (name, line, col) in &self.sys_calls {
            if system_arity(name).is_none() {
                out.push(Diagnostic::warning(
                    *line,
                    *col,
                    codes::UNKNOWN_SYSTEM_FUNCTION,
                    format!("unknown system function {name}"),
                ));
            }
        }
        if let Some(known) = known {
            let referenced: HashSet<(&str, u32, u32)> =
                self.references.iter().map(|(n, l, c)| (n.as_str(), *l, *c)).collect();
            for (name, line, col) in &self.idents {
                if known.contains(name)
                    || declared.contains(name.as_str())
                    || self.ports.contains(name)
                    || referenced.contains(&(name.as_str(), *line, *col))
                {
                    continue;
                }
                out.push(Diagnostic::warning(
                    *line,
                    *col,
                    codes::UNKNOWN_IDENTIFIER,
                    format!("unknown identifier {name}"),
                ));
            }
        }
        out
    }
}

fn is_verb(t: &Token) -> bool {
    t.is_kw("assert") || t.is_kw("assume") || t.is_kw("cover")
}
