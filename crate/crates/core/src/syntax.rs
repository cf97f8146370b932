//! Labeled λ-calculus: AST, concrete syntax, labeling and structural
//! predicates.
//!
//! Concrete syntax:
//!
//! ```text
//! expr ::= term | term '^' nat
//! term ::= var | '\' var '.' expr | '(' expr expr ')' | '(' expr ')'
//! var  ::= [a-zA-Z_][a-zA-Z0-9_]*
//! ```
//!
//! `--` starts a comment that runs to the end of the line. Subterms without
//! an explicit `^n` label are numbered depth-first, left to right, starting
//! after the largest explicit label.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A program point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(name: &str) -> Self {
        Var::new(name)
    }
}

/// A key of the abstract cache. Labels and variable names share one key
/// space; labels order before variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowKey {
    Label(Label),
    Var(Var),
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowKey::Label(l) => write!(f, "{l}"),
            FlowKey::Var(x) => write!(f, "{x}"),
        }
    }
}

impl From<Label> for FlowKey {
    fn from(l: Label) -> Self {
        FlowKey::Label(l)
    }
}

impl From<Var> for FlowKey {
    fn from(x: Var) -> Self {
        FlowKey::Var(x)
    }
}

impl From<&Var> for FlowKey {
    fn from(x: &Var) -> Self {
        FlowKey::Var(x.clone())
    }
}

/// Identity of an abstraction as a flow value: the label of the
/// abstraction node. The binder is carried along for display only.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbsId {
    pub label: Label,
    pub binder: Var,
}

impl fmt::Display for AbsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "λ{}@{}", self.binder, self.label)
    }
}

/// A labeled term `t^ℓ`.
///
/// Free variables and node count are computed once at construction.
#[derive(Debug, PartialEq, Eq)]
pub struct Expr {
    label: Label,
    term: Term,
    free: BTreeSet<Var>,
    size: usize,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Term {
    Var(Var),
    Lam(Var, Arc<Expr>),
    App(Arc<Expr>, Arc<Expr>),
}

impl Expr {
    pub fn var(label: Label, x: Var) -> Arc<Expr> {
        let free = BTreeSet::from([x.clone()]);
        Arc::new(Expr {
            label,
            term: Term::Var(x),
            free,
            size: 1,
        })
    }

    pub fn lam(label: Label, x: Var, body: Arc<Expr>) -> Arc<Expr> {
        let mut free = body.free.clone();
        free.remove(&x);
        let size = 1 + body.size;
        Arc::new(Expr {
            label,
            term: Term::Lam(x, body),
            free,
            size,
        })
    }

    pub fn app(label: Label, operator: Arc<Expr>, operand: Arc<Expr>) -> Arc<Expr> {
        let mut free = operator.free.clone();
        free.extend(operand.free.iter().cloned());
        let size = 1 + operator.size + operand.size;
        Arc::new(Expr {
            label,
            term: Term::App(operator, operand),
            free,
            size,
        })
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn term(&self) -> &Term {
        &self.term
    }

    /// Free variables, `fv(e)`.
    pub fn free_vars(&self) -> &BTreeSet<Var> {
        &self.free
    }

    /// Number of AST nodes: `|x| = 1`, `|λx.t| = 1 + |t|`,
    /// `|(t1 t2)| = 1 + |t1| + |t2|`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_closed(&self) -> bool {
        self.free.is_empty()
    }

    /// The flow value this node denotes, if it is an abstraction.
    pub fn abs_id(&self) -> Option<AbsId> {
        match &self.term {
            Term::Lam(x, _) => Some(AbsId {
                label: self.label,
                binder: x.clone(),
            }),
            _ => None,
        }
    }

    /// Pre-order traversal without recursion.
    pub fn preorder(self: &Arc<Self>) -> Preorder {
        Preorder {
            stack: vec![self.clone()],
        }
    }
}

pub struct Preorder {
    stack: Vec<Arc<Expr>>,
}

impl Iterator for Preorder {
    type Item = Arc<Expr>;

    fn next(&mut self) -> Option<Arc<Expr>> {
        let e = self.stack.pop()?;
        match &e.term {
            Term::Var(_) => {}
            Term::Lam(_, body) => self.stack.push(body.clone()),
            Term::App(f, a) => {
                self.stack.push(a.clone());
                self.stack.push(f.clone());
            }
        }
        Some(e)
    }
}

pub fn free_vars(e: &Expr) -> BTreeSet<Var> {
    e.free.clone()
}

/// `lab(e)`: every label in `e` plus every variable name occurring in it.
pub fn labels_of(e: &Arc<Expr>) -> BTreeSet<FlowKey> {
    let mut out = BTreeSet::new();
    for node in e.preorder() {
        out.insert(FlowKey::Label(node.label));
        match &node.term {
            Term::Var(x) | Term::Lam(x, _) => {
                out.insert(FlowKey::Var(x.clone()));
            }
            Term::App(..) => {}
        }
    }
    out
}

/// Occurrence counts of every binder whose bound variable does not occur
/// exactly once in its body. Binders are reported in pre-order.
pub fn linearity_violations(e: &Arc<Expr>) -> Vec<(Var, usize)> {
    // (binder label, name, count), plus a scope stack of indices into it.
    let mut binders: Vec<(Var, usize)> = Vec::new();
    let mut scope: Vec<(Var, usize)> = Vec::new();

    enum Step {
        Visit(Arc<Expr>),
        Leave,
    }
    let mut stack = vec![Step::Visit(e.clone())];
    while let Some(step) = stack.pop() {
        match step {
            Step::Leave => {
                scope.pop();
            }
            Step::Visit(node) => match &node.term {
                Term::Var(x) => {
                    if let Some((_, idx)) = scope.iter().rev().find(|(y, _)| y == x) {
                        binders[*idx].1 += 1;
                    }
                }
                Term::Lam(x, body) => {
                    scope.push((x.clone(), binders.len()));
                    binders.push((x.clone(), 0));
                    stack.push(Step::Leave);
                    stack.push(Step::Visit(body.clone()));
                }
                Term::App(f, a) => {
                    stack.push(Step::Visit(a.clone()));
                    stack.push(Step::Visit(f.clone()));
                }
            },
        }
    }
    binders.into_iter().filter(|(_, n)| *n != 1).collect()
}

/// True iff every bound variable occurs exactly once in its binder's body.
pub fn is_linear(e: &Arc<Expr>) -> bool {
    linearity_violations(e).is_empty()
}

/// Render `e`. With labels the output parses back to an identical tree;
/// labeled abstractions are parenthesised so the label cannot be mistaken
/// for the body's.
pub fn pretty(e: &Expr, with_labels: bool) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, with_labels);
    out
}

/// Render an abstraction as a value: the node's own label is omitted while
/// the labels inside its body are kept (when `with_labels` is set).
pub fn pretty_value(e: &Expr, with_labels: bool) -> String {
    match &e.term {
        Term::Lam(x, body) => {
            let mut out = format!("\\{x}.");
            write_expr(&mut out, body, with_labels);
            out
        }
        _ => pretty(e, with_labels),
    }
}

fn write_expr(out: &mut String, e: &Expr, with_labels: bool) {
    match &e.term {
        Term::Var(x) => out.push_str(x.as_str()),
        Term::Lam(x, body) => {
            if with_labels {
                out.push('(');
            }
            out.push('\\');
            out.push_str(x.as_str());
            out.push('.');
            write_expr(out, body, with_labels);
            if with_labels {
                out.push(')');
            }
        }
        Term::App(f, a) => {
            out.push('(');
            write_expr(out, f, with_labels);
            out.push(' ');
            write_expr(out, a, with_labels);
            out.push(')');
        }
    }
    if with_labels {
        out.push('^');
        out.push_str(&e.label.0.to_string());
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self, true))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("label {0} is used more than once")]
    DuplicateLabel(u32),
    #[error("variable `{0}` is bound more than once")]
    DuplicateBinder(String),
    #[error("variable `{0}` is both bound and free")]
    BinderCapturesFree(String),
}

/// An expression before labeling. Parsers and term builders produce this;
/// [`RawExpr::into_expr`] assigns labels and validates binder names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExpr {
    pub label: Option<u32>,
    pub node: RawNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawNode {
    Var(String),
    Lam(String, Box<RawExpr>),
    App(Box<RawExpr>, Box<RawExpr>),
}

impl RawExpr {
    pub fn var(name: impl Into<String>) -> RawExpr {
        RawExpr {
            label: None,
            node: RawNode::Var(name.into()),
        }
    }

    pub fn lam(binder: impl Into<String>, body: RawExpr) -> RawExpr {
        RawExpr {
            label: None,
            node: RawNode::Lam(binder.into(), Box::new(body)),
        }
    }

    pub fn app(operator: RawExpr, operand: RawExpr) -> RawExpr {
        RawExpr {
            label: None,
            node: RawNode::App(Box::new(operator), Box::new(operand)),
        }
    }

    fn children(&self) -> Vec<&RawExpr> {
        match &self.node {
            RawNode::Var(_) => vec![],
            RawNode::Lam(_, b) => vec![b],
            RawNode::App(f, a) => vec![f, a],
        }
    }

    pub fn has_explicit_labels(&self) -> bool {
        self.label.is_some() || self.children().into_iter().any(|c| c.has_explicit_labels())
    }

    fn free_names(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match &self.node {
            RawNode::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            RawNode::Lam(x, b) => {
                bound.push(x.clone());
                b.free_names(bound, out);
                bound.pop();
            }
            RawNode::App(f, a) => {
                f.free_names(bound, out);
                a.free_names(bound, out);
            }
        }
    }

    fn all_names(&self, out: &mut HashSet<String>) {
        match &self.node {
            RawNode::Var(x) => {
                out.insert(x.clone());
            }
            RawNode::Lam(x, b) => {
                out.insert(x.clone());
                b.all_names(out);
            }
            RawNode::App(f, a) => {
                f.all_names(out);
                a.all_names(out);
            }
        }
    }

    /// Rename binders so that every binder name is distinct and differs
    /// from every free variable. Binders that are already unique keep
    /// their names.
    pub fn alpha_rename(self) -> RawExpr {
        let mut free = BTreeSet::new();
        self.free_names(&mut Vec::new(), &mut free);
        let mut taken = HashSet::new();
        self.all_names(&mut taken);
        let mut binders: HashSet<String> = free.into_iter().collect();
        let mut scope = Vec::new();
        self.rename_in(&mut scope, &mut binders, &mut taken)
    }

    fn rename_in(
        self,
        scope: &mut Vec<(String, String)>,
        binders: &mut HashSet<String>,
        taken: &mut HashSet<String>,
    ) -> RawExpr {
        let node = match self.node {
            RawNode::Var(x) => {
                let renamed = scope
                    .iter()
                    .rev()
                    .find(|(old, _)| *old == x)
                    .map(|(_, new)| new.clone())
                    .unwrap_or(x);
                RawNode::Var(renamed)
            }
            RawNode::Lam(x, body) => {
                let fresh = if binders.contains(&x) {
                    let mut n = 1;
                    loop {
                        let candidate = format!("{x}_{n}");
                        if !taken.contains(&candidate) {
                            break candidate;
                        }
                        n += 1;
                    }
                } else {
                    x.clone()
                };
                taken.insert(fresh.clone());
                binders.insert(fresh.clone());
                scope.push((x, fresh.clone()));
                let body = body.rename_in(scope, binders, taken);
                scope.pop();
                RawNode::Lam(fresh, Box::new(body))
            }
            RawNode::App(f, a) => {
                let f = f.rename_in(scope, binders, taken);
                let a = a.rename_in(scope, binders, taken);
                RawNode::App(Box::new(f), Box::new(a))
            }
        };
        RawExpr {
            label: self.label,
            node,
        }
    }

    /// Assign fresh labels to unlabeled nodes and check the naming
    /// conventions: labels pairwise distinct, binders pairwise distinct and
    /// distinct from free variables.
    pub fn into_expr(self) -> Result<Arc<Expr>, SyntaxError> {
        let mut explicit = HashSet::new();
        let mut max = 0u32;
        let mut stack = vec![&self];
        while let Some(e) = stack.pop() {
            if let Some(l) = e.label {
                if !explicit.insert(l) {
                    return Err(SyntaxError::DuplicateLabel(l));
                }
                max = max.max(l);
            }
            stack.extend(e.children());
        }

        let mut free = BTreeSet::new();
        self.free_names(&mut Vec::new(), &mut free);
        let mut binders = HashSet::new();
        let mut stack = vec![&self];
        while let Some(e) = stack.pop() {
            if let RawNode::Lam(x, _) = &e.node {
                if free.contains(x) {
                    return Err(SyntaxError::BinderCapturesFree(x.clone()));
                }
                if !binders.insert(x.clone()) {
                    return Err(SyntaxError::DuplicateBinder(x.clone()));
                }
            }
            stack.extend(e.children());
        }

        let mut next = max + 1;
        let mut names = BTreeMap::new();
        Ok(self.build(&mut next, &mut names))
    }

    fn build(self, next: &mut u32, names: &mut BTreeMap<String, Var>) -> Arc<Expr> {
        let label = Label(self.label.unwrap_or_else(|| {
            let l = *next;
            *next += 1;
            l
        }));
        let mut intern = |s: String| names.entry(s).or_insert_with_key(|k| Var::new(k)).clone();
        match self.node {
            RawNode::Var(x) => Expr::var(label, intern(x)),
            RawNode::Lam(x, body) => {
                let x = intern(x);
                Expr::lam(label, x, body.build(next, names))
            }
            RawNode::App(f, a) => {
                let f = f.build(next, names);
                let a = a.build(next, names);
                Expr::app(label, f, a)
            }
        }
    }
}

impl From<&Expr> for RawExpr {
    fn from(e: &Expr) -> Self {
        let node = match &e.term {
            Term::Var(x) => RawNode::Var(x.as_str().to_owned()),
            Term::Lam(x, b) => RawNode::Lam(x.as_str().to_owned(), Box::new(b.as_ref().into())),
            Term::App(f, a) => {
                RawNode::App(Box::new(f.as_ref().into()), Box::new(a.as_ref().into()))
            }
        };
        RawExpr {
            label: Some(e.label.0),
            node,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Rename clashing binders instead of rejecting the program.
    pub alpha_rename: bool,
}

/// Parse program text into a labeled term.
pub fn parse(text: &str) -> Result<Arc<Expr>, SyntaxError> {
    parse_raw(text)?.into_expr()
}

pub fn parse_with(text: &str, options: ParseOptions) -> Result<Arc<Expr>, SyntaxError> {
    let raw = parse_raw(text)?;
    if options.alpha_rename {
        raw.alpha_rename().into_expr()
    } else {
        raw.into_expr()
    }
}

/// Parse without labeling or name validation.
pub fn parse_raw(text: &str) -> Result<RawExpr, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let e = parser.expr()?;
    match parser.peek() {
        Tok::Eof => Ok(e),
        _ => Err(parser.error("expected end of input")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Lambda,
    Dot,
    LParen,
    RParen,
    Caret,
    Nat(u32),
    Ident(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Lambda => f.write_str("`\\`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Nat(n) => write!(f, "number {n}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        let tok = match c {
            c if c.is_whitespace() => {
                bump(&mut chars);
                continue;
            }
            '-' => {
                bump(&mut chars);
                if chars.peek() != Some(&'-') {
                    return Err(SyntaxError::Parse {
                        line: tl,
                        column: tc,
                        message: "unexpected `-` (comments start with `--`)".into(),
                    });
                }
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
                continue;
            }
            '\\' | 'λ' => {
                bump(&mut chars);
                Tok::Lambda
            }
            '.' => {
                bump(&mut chars);
                Tok::Dot
            }
            '(' => {
                bump(&mut chars);
                Tok::LParen
            }
            ')' => {
                bump(&mut chars);
                Tok::RParen
            }
            '^' => {
                bump(&mut chars);
                Tok::Caret
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    s.push(d);
                    bump(&mut chars);
                }
                let n = s.parse::<u32>().map_err(|_| SyntaxError::Parse {
                    line: tl,
                    column: tc,
                    message: format!("label `{s}` is out of range"),
                })?;
                if n == 0 {
                    return Err(SyntaxError::Parse {
                        line: tl,
                        column: tc,
                        message: "labels are positive integers".into(),
                    });
                }
                Tok::Nat(n)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if !(d.is_ascii_alphanumeric() || d == '_') {
                        break;
                    }
                    s.push(d);
                    bump(&mut chars);
                }
                Tok::Ident(s)
            }
            other => {
                return Err(SyntaxError::Parse {
                    line: tl,
                    column: tc,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Spanned {
            tok,
            line: tl,
            column: tc,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> SyntaxError {
        let t = &self.tokens[self.pos];
        SyntaxError::Parse {
            line: t.line,
            column: t.column,
            message: format!("{message}, found {}", t.tok),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<RawExpr, SyntaxError> {
        let mut e = self.term()?;
        if *self.peek() == Tok::Caret {
            let at = self.pos;
            self.advance();
            match self.advance() {
                Tok::Nat(n) => {
                    if e.label.is_some() {
                        self.pos = at;
                        return Err(self.error("expression is already labeled"));
                    }
                    e.label = Some(n);
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.error("expected a label number after `^`"));
                }
            }
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<RawExpr, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.advance();
                Ok(RawExpr::var(x))
            }
            Tok::Lambda => {
                self.advance();
                let x = match self.peek().clone() {
                    Tok::Ident(x) => {
                        self.advance();
                        x
                    }
                    _ => return Err(self.error("expected a variable after `\\`")),
                };
                self.expect(Tok::Dot, "`.`")?;
                let body = self.expr()?;
                Ok(RawExpr::lam(x, body))
            }
            Tok::LParen => {
                self.advance();
                let first = self.expr()?;
                if *self.peek() == Tok::RParen {
                    self.advance();
                    return Ok(first);
                }
                let second = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(RawExpr::app(first, second))
            }
            _ => Err(self.error("expected a term")),
        }
    }
}
