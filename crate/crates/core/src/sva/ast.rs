//! Syntax tree for the assertion subset.
//!
//! The tree keeps every token of the source (parentheses, labels, action
//! blocks), so printing it with `Display` yields text whose token stream is
//! identical to the input's.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Ident(String),
    Number(String),
    Str(String),
    /// `$name` or `$name(args)`.
    SysCall { name: String, args: Option<Vec<Expr>> },
    /// Prefix operator, including the `not` property operator.
    Unary { op: String, operand: Box<Expr> },
    /// Infix operator: boolean, relational, `and`/`or`, `|->`, `|=>`, ...
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { cond: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    Paren(Box<Expr>),
    /// `base[index]`, `base[msb:lsb]`, `base[i+:w]`.
    Index { base: Box<Expr>, index: Box<Expr>, part: Option<(String, Box<Expr>)> },
    Member { base: Box<Expr>, field: String },
    Concat(Vec<Expr>),
    Replicate { count: Box<Expr>, items: Vec<Expr> },
    /// `lhs ##delay rhs`, or a leading `##delay rhs`.
    Delay { lhs: Option<Box<Expr>>, delay: CycleDelay, rhs: Box<Expr> },
    Repeat { operand: Box<Expr>, rep: Repetition },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Number(String),
    /// `$`, unbounded.
    Dollar,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Number(n) => f.write_str(n),
            Bound::Dollar => f.write_str("$"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Range {
    pub lo: String,
    pub hi: Option<Bound>,
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lo)?;
        if let Some(hi) = &self.hi {
            write!(f, " : {hi}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CycleDelay {
    /// `##N`
    Fixed(String),
    /// `##[m:n]`, `##[m:$]`
    Range { lo: String, hi: Bound },
}

impl fmt::Display for CycleDelay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleDelay::Fixed(n) => write!(f, "## {n}"),
            CycleDelay::Range { lo, hi } => write!(f, "## [ {lo} : {hi} ]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Repetition {
    /// `[*]`, `[*n]`, `[*m:n]`
    Consecutive(Option<Range>),
    /// `[+]`
    Plus,
    /// `[=n]`
    NonConsecutive(Range),
    /// `[->n]`
    Goto(Range),
}

impl fmt::Display for Repetition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Repetition::Consecutive(None) => f.write_str("[ * ]"),
            Repetition::Consecutive(Some(r)) => write!(f, "[ * {r} ]"),
            Repetition::Plus => f.write_str("[ + ]"),
            Repetition::NonConsecutive(r) => write!(f, "[ = {r} ]"),
            Repetition::Goto(r) => write!(f, "[ -> {r} ]"),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Expr]) -> fmt::Result {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(" , ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Ident(s) | Expr::Number(s) | Expr::Str(s) => f.write_str(s),
            Expr::SysCall { name, args } => {
                f.write_str(name)?;
                if let Some(args) = args {
                    f.write_str(" ( ")?;
                    write_list(f, args)?;
                    f.write_str(" )")?;
                }
                Ok(())
            }
            Expr::Unary { op, operand } => write!(f, "{op} {operand}"),
            Expr::Binary { op, lhs, rhs } => write!(f, "{lhs} {op} {rhs}"),
            Expr::Ternary { cond, then, otherwise } => write!(f, "{cond} ? {then} : {otherwise}"),
            Expr::Paren(inner) => write!(f, "( {inner} )"),
            Expr::Index { base, index, part } => {
                write!(f, "{base} [ {index}")?;
                if let Some((sep, rhs)) = part {
                    write!(f, " {sep} {rhs}")?;
                }
                f.write_str(" ]")
            }
            Expr::Member { base, field } => write!(f, "{base} . {field}"),
            Expr::Concat(items) => {
                f.write_str("{ ")?;
                write_list(f, items)?;
                f.write_str(" }")
            }
            Expr::Replicate { count, items } => {
                write!(f, "{{ {count} {{ ")?;
                write_list(f, items)?;
                f.write_str(" } }")
            }
            Expr::Delay { lhs, delay, rhs } => {
                if let Some(lhs) = lhs {
                    write!(f, "{lhs} ")?;
                }
                write!(f, "{delay} {rhs}")
            }
            Expr::Repeat { operand, rep } => write!(f, "{operand} {rep}"),
        }
    }
}

impl Expr {
    /// Visits every node depth-first.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Ident(_) | Expr::Number(_) | Expr::Str(_) => {}
            Expr::SysCall { args, .. } => {
                for a in args.iter().flatten() {
                    a.walk(visit);
                }
            }
            Expr::Unary { operand, .. } => operand.walk(visit),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(visit);
                rhs.walk(visit);
            }
            Expr::Ternary { cond, then, otherwise } => {
                cond.walk(visit);
                then.walk(visit);
                otherwise.walk(visit);
            }
            Expr::Paren(inner) => inner.walk(visit),
            Expr::Index { base, index, part } => {
                base.walk(visit);
                index.walk(visit);
                if let Some((_, p)) = part {
                    p.walk(visit);
                }
            }
            Expr::Member { base, .. } => base.walk(visit),
            Expr::Concat(items) => items.iter().for_each(|i| i.walk(visit)),
            Expr::Replicate { count, items } => {
                count.walk(visit);
                items.iter().for_each(|i| i.walk(visit));
            }
            Expr::Delay { lhs, rhs, .. } => {
                if let Some(l) = lhs {
                    l.walk(visit);
                }
                rhs.walk(visit);
            }
            Expr::Repeat { operand, .. } => operand.walk(visit),
        }
    }

    /// Top-level operator when this is an implication.
    pub fn implication_op(&self) -> Option<&str> {
        match self {
            Expr::Binary { op, .. } if op == "|->" || op == "|=>" => Some(op),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTerm {
    pub edge: Option<String>,
    pub expr: Expr,
}

/// `@(posedge clk or negedge rst)` or `@clk`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockingEvent {
    pub parenthesized: bool,
    pub terms: Vec<EventTerm>,
    /// Separators between terms: `or` or `,`.
    pub separators: Vec<String>,
}

impl fmt::Display for ClockingEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("@ ")?;
        if self.parenthesized {
            f.write_str("( ")?;
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", self.separators[i - 1])?;
            }
            if let Some(edge) = &t.edge {
                write!(f, "{edge} ")?;
            }
            write!(f, "{}", t.expr)?;
        }
        if self.parenthesized {
            f.write_str(" )")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySpec {
    pub clocking: Option<ClockingEvent>,
    pub disable_iff: Option<Expr>,
    pub body: Expr,
}

impl fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = &self.clocking {
            write!(f, "{c} ")?;
        }
        if let Some(d) = &self.disable_iff {
            write!(f, "disable iff ( {d} ) ")?;
        }
        write!(f, "{}", self.body)
    }
}

impl PropertySpec {
    /// Name referenced when the whole spec is a bare identifier.
    pub fn reference(&self) -> Option<&str> {
        match (&self.clocking, &self.disable_iff, &self.body) {
            (None, None, Expr::Ident(name)) => Some(name),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyDecl {
    pub name: String,
    /// Formal argument names, when a port list is present.
    pub ports: Option<Vec<String>>,
    pub spec: PropertySpec,
    /// The optional `;` before `endproperty` was written.
    pub semicolon: bool,
    pub end_label: Option<String>,
}

impl fmt::Display for PropertyDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "property {}", self.name)?;
        if let Some(ports) = &self.ports {
            write!(f, " ( {} )", ports.join(" , "))?;
        }
        write!(f, " ; {}", self.spec)?;
        if self.semicolon {
            f.write_str(" ;")?;
        }
        f.write_str(" endproperty")?;
        if let Some(label) = &self.end_label {
            write!(f, " : {label}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionBlock {
    pub pass: Option<Expr>,
    pub fail: Option<Expr>,
}

impl fmt::Display for ActionBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.pass, &self.fail) {
            (None, None) => f.write_str(";"),
            (Some(p), None) => write!(f, "{p} ;"),
            (None, Some(e)) => write!(f, "else {e} ;"),
            (Some(p), Some(e)) => write!(f, "{p} ; else {e} ;"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertStmt {
    pub label: Option<String>,
    /// `assert`, `assume` or `cover`.
    pub verb: String,
    pub spec: PropertySpec,
    pub action: ActionBlock,
}

impl fmt::Display for AssertStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(label) = &self.label {
            write!(f, "{label} : ")?;
        }
        write!(f, "{} property ( {} ) {}", self.verb, self.spec, self.action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AstKind {
    PropertyDecl,
    AssertStmt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Property(PropertyDecl),
    Assert(AssertStmt),
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Property(p) => p.fmt(f),
            Item::Assert(a) => a.fmt(f),
        }
    }
}

/// One or more declarations/statements parsed from a single source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvaAst {
    pub items: Vec<Item>,
}

impl SvaAst {
    fn first(&self) -> &Item {
        &self.items[0]
    }

    pub fn kind(&self) -> AstKind {
        match self.first() {
            Item::Property(_) => AstKind::PropertyDecl,
            Item::Assert(_) => AstKind::AssertStmt,
        }
    }

    /// Property name, or statement label.
    pub fn name(&self) -> Option<&str> {
        match self.first() {
            Item::Property(p) => Some(&p.name),
            Item::Assert(a) => a.label.as_deref(),
        }
    }

    fn spec(&self) -> &PropertySpec {
        match self.first() {
            Item::Property(p) => &p.spec,
            Item::Assert(a) => &a.spec,
        }
    }

    pub fn clocking(&self) -> Option<&ClockingEvent> {
        self.spec().clocking.as_ref()
    }

    pub fn disable_expr(&self) -> Option<&Expr> {
        self.spec().disable_iff.as_ref()
    }

    pub fn body(&self) -> &Expr {
        &self.spec().body
    }

    pub fn properties(&self) -> impl Iterator<Item = &PropertyDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Property(p) => Some(p),
            _ => None,
        })
    }

    pub fn asserts(&self) -> impl Iterator<Item = &AssertStmt> {
        self.items.iter().filter_map(|i| match i {
            Item::Assert(a) => Some(a),
            _ => None,
        })
    }
}

impl fmt::Display for SvaAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{item}")?;
        }
        Ok(())
    }
}
