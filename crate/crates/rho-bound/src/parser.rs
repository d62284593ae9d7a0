//! Loader and printer for the `.koat`-style surface syntax.
//!
//! ```text
//! (GOAL COMPLEXITY)
//! (STARTTERM (FUNCTIONSYMBOLS l0))
//! (VAR a x y)
//! (RETURN f2 a)
//! (RULES
//!   l0(a,x,y) -> l1(a,x,y)
//!   l1(a,x,y) -> l1(a, x-1, y + @f1(x,x,y)) :|: x > 0
//! )
//! ```
//!
//! A call may carry an explicit id, `@f1[rho3](x,x,y)`; the printer uses this
//! form when one call is shared by several transitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::its::{Atom, Constraint, FunctionCall, Program, Transition};
use crate::poly::{Polynomial, Sym};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Arrow,
    GuardSep,
    And,
    Plus,
    Minus,
    Star,
    Caret,
    At,
    Cmp(CmpOp),
    Ident(String),
    Num(BigInt),
    Eof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Eof => f.write_str("end of input"),
            other => write!(f, "{other:?}"),
        }
    }
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    file: &'a str,
}

impl<'a> Lexer<'a> {
    fn span(&self) -> SourceSpan {
        SourceSpan { file: self.file.to_string(), line: self.line, column: self.col }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn tokens(mut self) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek(0) {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let span = self.span();
            let Some(c) = self.peek(0) else {
                out.push((Tok::Eof, span));
                return Ok(out);
            };
            let two: String = [Some(c), self.peek(1)].iter().flatten().collect();
            let three: String = [Some(c), self.peek(1), self.peek(2)].iter().flatten().collect();
            let (tok, len) = if three == ":|:" {
                (Tok::GuardSep, 3)
            } else if two == "->" {
                (Tok::Arrow, 2)
            } else if two == "&&" || two == "/\\" {
                (Tok::And, 2)
            } else if two == "<=" {
                (Tok::Cmp(CmpOp::Le), 2)
            } else if two == ">=" {
                (Tok::Cmp(CmpOp::Ge), 2)
            } else if two == "==" {
                (Tok::Cmp(CmpOp::Eq), 2)
            } else if two == "!=" {
                (Tok::Cmp(CmpOp::Ne), 2)
            } else {
                match c {
                    '(' => (Tok::LParen, 1),
                    ')' => (Tok::RParen, 1),
                    '[' => (Tok::LBrack, 1),
                    ']' => (Tok::RBrack, 1),
                    ',' => (Tok::Comma, 1),
                    '+' => (Tok::Plus, 1),
                    '-' => (Tok::Minus, 1),
                    '*' => (Tok::Star, 1),
                    '^' => (Tok::Caret, 1),
                    '@' => (Tok::At, 1),
                    '<' => (Tok::Cmp(CmpOp::Lt), 1),
                    '>' => (Tok::Cmp(CmpOp::Gt), 1),
                    '=' => (Tok::Cmp(CmpOp::Eq), 1),
                    c if c.is_ascii_digit() => {
                        let mut s = String::new();
                        while let Some(d) = self.peek(0).filter(|d| d.is_ascii_digit()) {
                            s.push(d);
                            self.bump();
                        }
                        out.push((Tok::Num(s.parse().unwrap()), span));
                        continue;
                    }
                    c if c.is_alphabetic() || c == '_' => {
                        let mut s = String::new();
                        while let Some(d) =
                            self.peek(0).filter(|d| d.is_alphanumeric() || *d == '_' || *d == '\'')
                        {
                            s.push(d);
                            self.bump();
                        }
                        out.push((Tok::Ident(s), span));
                        continue;
                    }
                    other => {
                        return Err(ParseError {
                            span,
                            message: format!("unexpected character `{other}`"),
                        })
                    }
                }
            };
            for _ in 0..len {
                self.bump();
            }
            out.push((tok, span));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    variables: Vec<String>,
    initial: Option<String>,
    returns: BTreeMap<String, String>,
    calls: Vec<FunctionCall>,
    transitions: Vec<Transition>,
    locations: BTreeSet<String>,
    spans: BTreeMap<String, SourceSpan>,
}

type PResult<T> = Result<T, ParseError>;

/// Expression over the rule's local names; calls are recorded as they appear.
struct Scope<'a> {
    names: &'a BTreeMap<String, String>,
    allow_calls: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1.clone()
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError { span: self.span(), message: message.into() })
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            let found = self.peek().clone();
            self.err(format!("expected {t}, found {found}"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    fn file(&mut self) -> PResult<()> {
        while *self.peek() != Tok::Eof {
            self.expect(Tok::LParen)?;
            let kw_span = self.span();
            let kw = self.ident()?;
            match kw.as_str() {
                "GOAL" => {
                    self.ident()?;
                }
                "STARTTERM" => {
                    self.expect(Tok::LParen)?;
                    let k = self.ident()?;
                    if k != "FUNCTIONSYMBOLS" {
                        return self.err("expected FUNCTIONSYMBOLS");
                    }
                    let l = self.ident()?;
                    self.locations.insert(l.clone());
                    self.initial = Some(l);
                    self.expect(Tok::RParen)?;
                }
                "VAR" => {
                    while let Tok::Ident(_) = self.peek() {
                        let v = self.ident()?;
                        if self.variables.contains(&v) {
                            return self.err(format!("duplicate variable `{v}`"));
                        }
                        self.variables.push(v);
                    }
                }
                "RETURN" => {
                    let l = self.ident()?;
                    let v = self.ident()?;
                    if !self.variables.contains(&v) {
                        return Err(ParseError {
                            span: kw_span,
                            message: format!("undeclared variable `{v}`"),
                        });
                    }
                    if self.returns.contains_key(&l) {
                        return Err(ParseError {
                            span: kw_span,
                            message: format!("location `{l}` has two RETURN lines"),
                        });
                    }
                    self.locations.insert(l.clone());
                    self.returns.insert(l, v);
                }
                "RULES" => {
                    while *self.peek() != Tok::RParen {
                        if *self.peek() == Tok::Eof {
                            return self.err("expected `)` closing RULES");
                        }
                        self.rule()?;
                    }
                }
                other => {
                    return Err(ParseError {
                        span: kw_span,
                        message: format!("unknown section `{other}`"),
                    })
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(())
    }

    fn rule(&mut self) -> PResult<()> {
        let span = self.span();
        let src = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut names = BTreeMap::new();
        let mut idx = 0;
        while *self.peek() != Tok::RParen {
            if idx > 0 {
                self.expect(Tok::Comma)?;
            }
            let n = self.ident()?;
            let Some(v) = self.variables.get(idx) else {
                return self.err("more arguments than declared variables");
            };
            if names.insert(n.clone(), v.clone()).is_some() {
                return self.err(format!("repeated argument `{n}`"));
            }
            idx += 1;
        }
        if idx != self.variables.len() {
            return self.err(format!("expected {} arguments", self.variables.len()));
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Arrow)?;
        let dst = self.ident()?;
        let scope = Scope { names: &names, allow_calls: true };
        let args = self.args(&scope)?;
        let eta: BTreeMap<String, Polynomial> = self.variables.iter().cloned().zip(args).collect();
        let mut branches: Vec<Vec<Atom>> = vec![Vec::new()];
        if *self.peek() == Tok::GuardSep {
            self.next();
            let scope = Scope { names: &names, allow_calls: false };
            loop {
                let alts = self.cond(&scope)?;
                let mut nb = Vec::new();
                for b in &branches {
                    for alt in &alts {
                        let mut nbr = b.clone();
                        nbr.extend(alt.iter().cloned());
                        nb.push(nbr);
                    }
                }
                branches = nb;
                if *self.peek() == Tok::And {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.locations.insert(src.clone());
        self.locations.insert(dst.clone());
        for atoms in branches {
            let id = format!("t{}", self.transitions.len());
            self.spans.insert(id.clone(), span.clone());
            self.transitions.push(Transition {
                id,
                source: src.clone(),
                target: dst.clone(),
                guard: Constraint::new(atoms),
                eta: eta.clone(),
            });
        }
        Ok(())
    }

    fn args(&mut self, scope: &Scope) -> PResult<Vec<Polynomial>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RParen {
            if !out.is_empty() {
                self.expect(Tok::Comma)?;
            }
            out.push(self.expr(scope)?);
        }
        if out.len() != self.variables.len() {
            return self.err(format!(
                "expected {} arguments, found {}",
                self.variables.len(),
                out.len()
            ));
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    /// One comparison; `!=` yields two alternatives.
    fn cond(&mut self, scope: &Scope) -> PResult<Vec<Vec<Atom>>> {
        let l = self.expr(scope)?;
        let op = match self.next() {
            Tok::Cmp(op) => op,
            other => {
                self.pos -= 1;
                return self.err(format!("expected comparison, found {other}"));
            }
        };
        let r = self.expr(scope)?;
        let one = Polynomial::int(1);
        Ok(match op {
            CmpOp::Lt => vec![vec![Atom::lt(l, r)]],
            CmpOp::Gt => vec![vec![Atom::lt(r, l)]],
            CmpOp::Le => vec![vec![Atom::lt(l, &r + &one)]],
            CmpOp::Ge => vec![vec![Atom::lt(r, &l + &one)]],
            CmpOp::Eq => vec![vec![Atom::lt(l.clone(), &r + &one), Atom::lt(r, &l + &one)]],
            CmpOp::Ne => vec![vec![Atom::lt(l.clone(), r.clone())], vec![Atom::lt(r, l)]],
        })
    }

    fn expr(&mut self, scope: &Scope) -> PResult<Polynomial> {
        let mut acc = self.term(scope)?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    acc = &acc + &self.term(scope)?;
                }
                Tok::Minus => {
                    self.next();
                    acc = &acc - &self.term(scope)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self, scope: &Scope) -> PResult<Polynomial> {
        let mut acc = self.unary(scope)?;
        while *self.peek() == Tok::Star {
            self.next();
            acc = &acc * &self.unary(scope)?;
        }
        Ok(acc)
    }

    fn unary(&mut self, scope: &Scope) -> PResult<Polynomial> {
        if *self.peek() == Tok::Minus {
            self.next();
            return Ok(-&self.unary(scope)?);
        }
        let base = self.primary(scope)?;
        if *self.peek() == Tok::Caret {
            self.next();
            match self.next() {
                Tok::Num(n) => {
                    let e: u32 = n.try_into().map_err(|_| ParseError {
                        span: self.span(),
                        message: "exponent too large".into(),
                    })?;
                    return Ok(base.pow(e));
                }
                other => return self.err(format!("expected exponent, found {other}")),
            }
        }
        Ok(base)
    }

    fn primary(&mut self, scope: &Scope) -> PResult<Polynomial> {
        let span = self.span();
        match self.next() {
            Tok::Num(n) => Ok(Polynomial::constant(n)),
            Tok::Ident(name) => match scope.names.get(&name) {
                Some(v) => Ok(Polynomial::var(v)),
                None => Err(ParseError { span, message: format!("undeclared variable `{name}`") }),
            },
            Tok::LParen => {
                let e = self.expr(scope)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::At => {
                if !scope.allow_calls {
                    return Err(ParseError {
                        span,
                        message: "function call not allowed here".into(),
                    });
                }
                let target = self.ident()?;
                let explicit = if *self.peek() == Tok::LBrack {
                    self.next();
                    let id = self.ident()?;
                    self.expect(Tok::RBrack)?;
                    Some(id)
                } else {
                    None
                };
                let inner = Scope { names: scope.names, allow_calls: false };
                let args = match self.args(&inner) {
                    Err(e) if e.message.contains("not allowed") => {
                        return Err(ParseError {
                            span: e.span,
                            message: "nested function call in call argument".into(),
                        })
                    }
                    r => r?,
                };
                let zeta: BTreeMap<String, Polynomial> =
                    self.variables.iter().cloned().zip(args).collect();
                if Some(&target) == self.initial.as_ref() {
                    return Err(ParseError {
                        span,
                        message: "call target declared as start location".into(),
                    });
                }
                self.locations.insert(target.clone());
                let id = match explicit {
                    Some(id) => {
                        if let Some(c) = self.calls.iter().find(|c| c.id == id) {
                            if c.target != target || c.zeta != zeta {
                                return Err(ParseError {
                                    span,
                                    message: format!("call id `{id}` reused with different call"),
                                });
                            }
                        } else {
                            self.calls.push(FunctionCall { id: id.clone(), target, zeta });
                        }
                        id
                    }
                    None => {
                        let mut n = self.calls.len() + 1;
                        while self.calls.iter().any(|c| c.id == format!("rho{n}")) {
                            n += 1;
                        }
                        let id = format!("rho{n}");
                        self.calls.push(FunctionCall { id: id.clone(), target, zeta });
                        id
                    }
                };
                Ok(Polynomial::sym(Sym::Call(id)))
            }
            other => Err(ParseError { span, message: format!("unexpected {other}") }),
        }
    }
}

/// Parses and validates a program.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    parse_named(text, "<input>")
}

pub fn parse_named(text: &str, file: &str) -> Result<Program, ParseError> {
    let toks = Lexer { chars: text.chars().collect(), pos: 0, line: 1, col: 1, file }.tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        variables: Vec::new(),
        initial: None,
        returns: BTreeMap::new(),
        calls: Vec::new(),
        transitions: Vec::new(),
        locations: BTreeSet::new(),
        spans: BTreeMap::new(),
    };
    p.file()?;
    let top = SourceSpan { file: file.to_string(), line: 1, column: 1 };
    let Some(initial) = p.initial.clone() else {
        return Err(ParseError { span: top, message: "missing STARTTERM".into() });
    };
    let program = Program {
        variables: p.variables,
        locations: p.locations,
        initial,
        returns: p.returns,
        calls: p.calls,
        transitions: p.transitions,
    };
    if let Err(diags) = program.validate() {
        let d = &diags[0];
        let span = p.spans.get(&d.subject).cloned().unwrap_or(top);
        return Err(ParseError { span, message: d.to_string() });
    }
    Ok(program)
}

fn render_poly(p: &Polynomial, program: &Program, st: &mut PrintState) -> String {
    p.render(|s| match s {
        Sym::Var(v) => v.clone(),
        Sym::Call(id) => st.call_text(id, program),
    })
}

struct PrintState {
    seen: BTreeSet<String>,
    shared: BTreeSet<String>,
}

impl PrintState {
    fn call_text(&mut self, id: &str, program: &Program) -> String {
        let c = program.call(id).expect("declared call");
        let args: Vec<String> =
            program.variables.iter().map(|v| c.zeta[v].to_string()).collect();
        let auto = format!("rho{}", self.seen.len() + 1);
        let explicit = self.seen.contains(id) || self.shared.contains(id) || id != auto;
        self.seen.insert(id.to_string());
        if explicit {
            format!("@{}[{}]({})", c.target, id, args.join(", "))
        } else {
            format!("@{}({})", c.target, args.join(", "))
        }
    }
}

/// Renders a program so that [`parse`] gives it back unchanged.
pub fn pretty_print(program: &Program) -> String {
    let mut s = String::new();
    s.push_str("(GOAL COMPLEXITY)\n");
    s.push_str(&format!("(STARTTERM (FUNCTIONSYMBOLS {}))\n", program.initial));
    s.push_str(&format!("(VAR {})\n", program.variables.join(" ")));
    for (l, v) in &program.returns {
        s.push_str(&format!("(RETURN {l} {v})\n"));
    }
    let shared = program
        .calls
        .iter()
        .filter(|c| program.trans_of(&c.id).len() > 1)
        .map(|c| c.id.clone())
        .collect();
    let mut st = PrintState { seen: BTreeSet::new(), shared };
    let lhs_args = program.variables.join(",");
    s.push_str("(RULES\n");
    for t in &program.transitions {
        let rhs: Vec<String> =
            program.variables.iter().map(|v| render_poly(&t.eta[v], program, &mut st)).collect();
        s.push_str(&format!("  {}({}) -> {}({})", t.source, lhs_args, t.target, rhs.join(", ")));
        if !t.guard.is_true() {
            s.push_str(&format!(" :|: {}", t.guard));
        }
        s.push('\n');
    }
    s.push_str(")\n");
    s
}
