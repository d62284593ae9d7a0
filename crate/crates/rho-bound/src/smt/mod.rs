//! Satisfiability and entailment queries: exact internal backend and an SMT-LIB2 subprocess client.

pub mod lp;
pub mod sexpr;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::bounds::call_var;
use crate::its::{Atom, Constraint};
use crate::poly::{Polynomial, QPoly, Sym};
use lp::{LinCons, LinExpr, Lp, LpOutcome, Q};
use sexpr::SExpr;

/// Environment variable naming the default external solver command.
pub const SMT_ENV: &str = "RHO_BOUND_SMT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }

    fn test(self, a: &Q, b: &Q) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assertion {
    pub lhs: QPoly,
    pub cmp: Cmp,
    pub rhs: QPoly,
}

impl Assertion {
    pub fn new(lhs: QPoly, cmp: Cmp, rhs: QPoly) -> Self {
        Assertion { lhs, cmp, rhs }
    }

    pub fn is_linear(&self) -> bool {
        self.lhs.is_linear() && self.rhs.is_linear()
    }

    pub fn holds(&self, model: &Model) -> Option<bool> {
        let look = |s: &Sym| model.get(s.name()).cloned();
        Some(self.cmp.test(&self.lhs.eval_with(look)?, &self.rhs.eval_with(look)?))
    }

    fn vars(&self) -> BTreeSet<String> {
        self.lhs.vars().into_iter().chain(self.rhs.vars()).collect()
    }
}

pub type Model = BTreeMap<String, BigRational>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Query {
    pub decls: BTreeMap<String, Sort>,
    pub assertions: Vec<Assertion>,
    /// Objectives minimized in order.
    pub minimize: Vec<QPoly>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Sat(Model),
    Unsat,
    Unknown,
}

impl Answer {
    pub fn is_sat(&self) -> bool {
        matches!(self, Answer::Sat(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entailment {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmtError {
    #[error("solver `{command}` failed: {message}")]
    Environment { command: String, message: String },
    #[error("unexpected solver reply: {excerpt}")]
    Protocol { excerpt: String },
}

#[derive(Clone, Debug)]
pub struct SmtConfig {
    /// External solver command line; `None` selects the internal backend.
    pub command: Option<String>,
    pub timeout: Duration,
    /// Values tried per variable by grid enumeration on nonlinear queries.
    pub grid: Vec<i64>,
    pub node_limit: usize,
}

impl Default for SmtConfig {
    fn default() -> Self {
        SmtConfig { command: None, timeout: Duration::from_secs(10), grid: (-2..=2).collect(), node_limit: 200 }
    }
}

impl SmtConfig {
    pub fn from_env() -> Self {
        let command = std::env::var(SMT_ENV).ok().filter(|s| !s.trim().is_empty());
        SmtConfig { command, ..Self::default() }
    }

    pub fn internal() -> Self {
        Self::default()
    }
}

impl Query {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, sort: Sort) {
        self.decls.insert(name.to_string(), sort);
    }

    pub fn assert(&mut self, lhs: QPoly, cmp: Cmp, rhs: QPoly) {
        self.assertions.push(Assertion::new(lhs, cmp, rhs));
    }

    pub fn is_linear(&self) -> bool {
        self.assertions.iter().all(|a| a.is_linear())
    }

    fn all_vars(&self) -> BTreeMap<String, Sort> {
        let mut m = self.decls.clone();
        for a in &self.assertions {
            for v in a.vars() {
                m.entry(v).or_insert(Sort::Int);
            }
        }
        for o in &self.minimize {
            for v in o.vars() {
                m.entry(v).or_insert(Sort::Int);
            }
        }
        m
    }

    /// Exact check of a model; integer-sorted variables must be integral.
    pub fn check_model(&self, model: &Model) -> bool {
        let vars = self.all_vars();
        let mut full = model.clone();
        for (v, s) in &vars {
            let val = full.entry(v.clone()).or_insert_with(Q::zero);
            if *s == Sort::Int && !val.is_integer() {
                return false;
            }
        }
        self.assertions.iter().all(|a| a.holds(&full) == Some(true))
    }

    pub fn logic(&self) -> &'static str {
        let sorts: BTreeSet<Sort> = self.all_vars().values().copied().collect();
        match (self.is_linear(), sorts.contains(&Sort::Int), sorts.contains(&Sort::Real)) {
            (true, _, false) => "QF_LIA",
            (true, false, true) => "QF_LRA",
            (true, true, true) => "QF_LIRA",
            (false, _, false) => "QF_NIA",
            (false, false, true) => "QF_NRA",
            (false, true, true) => "QF_NIRA",
        }
    }

    /// Deterministic SMT-LIB2 script ending in `(check-sat)` and `(get-model)`.
    pub fn to_smtlib(&self) -> String {
        let vars = self.all_vars();
        let real = vars.values().any(|s| *s == Sort::Real);
        let mut out = String::new();
        let _ = writeln!(out, "(set-logic {})", self.logic());
        for (v, s) in &vars {
            let sort = match s {
                Sort::Int => "Int",
                Sort::Real => "Real",
            };
            let _ = writeln!(out, "(declare-const {} {sort})", symbol(v));
        }
        for a in &self.assertions {
            let (l, r) = integral_sides(a);
            let _ = writeln!(out, "(assert ({} {} {}))", a.cmp.symbol(), term(&l, real), term(&r, real));
        }
        out.push_str("(check-sat)\n(get-model)\n");
        out
    }

    /// Reads the fragment produced by [`Query::to_smtlib`].
    pub fn from_smtlib(text: &str) -> Result<Query, String> {
        let mut q = Query::new();
        for e in sexpr::parse_all(text)? {
            let l = e.as_list().ok_or_else(|| format!("unexpected `{e}`"))?;
            match e.head() {
                Some("set-logic" | "set-option" | "check-sat" | "get-model" | "exit") => {}
                Some("declare-const") if l.len() == 3 => {
                    q.declare(l[1].as_atom().ok_or("bad name")?, parse_sort(&l[2])?);
                }
                Some("declare-fun") if l.len() == 4 && l[2].as_list() == Some(&[]) => {
                    q.declare(l[1].as_atom().ok_or("bad name")?, parse_sort(&l[3])?);
                }
                Some("assert") if l.len() == 2 => parse_assertion(&l[1], &mut q.assertions)?,
                _ => return Err(format!("unsupported command `{e}`")),
            }
        }
        Ok(q)
    }
}

fn parse_sort(e: &SExpr) -> Result<Sort, String> {
    match e.as_atom() {
        Some("Int") => Ok(Sort::Int),
        Some("Real") => Ok(Sort::Real),
        _ => Err(format!("unsupported sort `{e}`")),
    }
}

fn parse_assertion(e: &SExpr, out: &mut Vec<Assertion>) -> Result<(), String> {
    let l = e.as_list().ok_or_else(|| format!("bad assertion `{e}`"))?;
    let cmp = match e.head() {
        Some("and") => {
            for c in &l[1..] {
                parse_assertion(c, out)?;
            }
            return Ok(());
        }
        Some("<") => Cmp::Lt,
        Some("<=") => Cmp::Le,
        Some("=") => Cmp::Eq,
        Some(">=") => Cmp::Ge,
        Some(">") => Cmp::Gt,
        _ => return Err(format!("unsupported assertion `{e}`")),
    };
    if l.len() != 3 {
        return Err(format!("bad arity in `{e}`"));
    }
    out.push(Assertion::new(parse_term(&l[1])?, cmp, parse_term(&l[2])?));
    Ok(())
}

fn parse_term(e: &SExpr) -> Result<QPoly, String> {
    match e {
        SExpr::Atom(a) => match parse_number(a) {
            Some(n) => Ok(QPoly::constant(n)),
            None => Ok(QPoly::var(a)),
        },
        SExpr::List(l) => {
            let args = l[1..].iter().map(parse_term).collect::<Result<Vec<_>, _>>()?;
            match (e.head(), args.len()) {
                (Some("+"), _) => Ok(args.iter().fold(QPoly::zero(), |a, b| &a + b)),
                (Some("*"), _) => Ok(args.iter().fold(QPoly::one(), |a, b| &a * b)),
                (Some("-"), 1) => Ok(-&args[0]),
                (Some("-"), n) if n > 1 => Ok(args[1..].iter().fold(args[0].clone(), |a, b| &a - b)),
                (Some("/"), 2) => match args[1].as_constant() {
                    Some(d) if !d.is_zero() => Ok(args[0].scale(&(Q::one() / d))),
                    _ => Err(format!("non-constant divisor in `{e}`")),
                },
                _ => Err(format!("unsupported term `{e}`")),
            }
        }
    }
}

fn parse_number(a: &str) -> Option<Q> {
    if let Some((i, f)) = a.split_once('.') {
        if i.is_empty() || !i.bytes().all(|b| b.is_ascii_digit()) || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let den = BigInt::from(10u32).pow(f.len() as u32);
        let num: BigInt = format!("{i}{f}").parse().ok()?;
        return Some(Q::new(num, den));
    }
    if !a.is_empty() && a.bytes().all(|b| b.is_ascii_digit()) {
        return Some(Q::from_integer(a.parse().ok()?));
    }
    None
}

fn symbol(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

/// Both sides scaled by the common denominator.
fn integral_sides(a: &Assertion) -> (QPoly, QPoly) {
    let mut l = BigInt::one();
    for (_, c) in a.lhs.terms().chain(a.rhs.terms()) {
        l = l.lcm(c.denom());
    }
    let k = Q::from_integer(l);
    (a.lhs.scale(&k), a.rhs.scale(&k))
}

fn numeral(c: &BigInt, real: bool) -> String {
    let body = if real { format!("{}.0", c.abs()) } else { c.abs().to_string() };
    if c.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn term(p: &QPoly, real: bool) -> String {
    let mut parts = Vec::new();
    for (m, c) in p.terms() {
        let c = c.to_integer();
        let mut factors = Vec::new();
        for (s, e) in m {
            for _ in 0..*e {
                factors.push(symbol(s.name()));
            }
        }
        if factors.is_empty() {
            parts.push(numeral(&c, real));
            continue;
        }
        if !c.is_one() {
            factors.insert(0, numeral(&c, real));
        }
        parts.push(if factors.len() == 1 { factors.pop().unwrap() } else { format!("(* {})", factors.join(" ")) });
    }
    match parts.len() {
        0 => numeral(&BigInt::zero(), real),
        1 => parts.pop().unwrap(),
        _ => format!("(+ {})", parts.join(" ")),
    }
}

/// Decides the query; every `sat` answer is replayed exactly and downgraded to `unknown` on mismatch.
pub fn solve(q: &Query, cfg: &SmtConfig) -> Result<Answer, SmtError> {
    let ans = match &cfg.command {
        Some(cmd) if q.minimize.is_empty() => solve_external(q, cmd, cfg.timeout)?,
        Some(cmd) => minimize_external(q, cmd, cfg.timeout)?,
        None => solve_internal(q, cfg),
    };
    Ok(match ans {
        Answer::Sat(mut m) => {
            for v in q.all_vars().keys() {
                m.entry(v.clone()).or_insert_with(Q::zero);
            }
            if q.check_model(&m) {
                Answer::Sat(m)
            } else {
                Answer::Unknown
            }
        }
        other => other,
    })
}

pub fn solve_internal(q: &Query, cfg: &SmtConfig) -> Answer {
    if q.is_linear() {
        solve_linear(q, cfg)
    } else {
        solve_grid(q, cfg)
    }
}

fn to_lin(p: &QPoly, index: &BTreeMap<String, usize>) -> LinExpr {
    let mut e = LinExpr::constant(p.constant_term());
    for (m, c) in p.terms() {
        if let Some((s, _)) = m.iter().next() {
            e.add_term(index[s.name()], c.clone());
        }
    }
    e
}

fn gcd_of(e: &LinExpr) -> BigInt {
    e.coeffs.values().fold(BigInt::zero(), |g, c| g.gcd(&c.to_integer()))
}

fn solve_linear(q: &Query, cfg: &SmtConfig) -> Answer {
    let vars = q.all_vars();
    let names: Vec<String> = vars.keys().cloned().collect();
    let index: BTreeMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let mut lp = Lp::new();
    for _ in &names {
        lp.new_var(false);
    }
    let int_vars: Vec<usize> = names.iter().enumerate().filter(|(_, n)| vars[*n] == Sort::Int).map(|(i, _)| i).collect();
    let mut eps: Option<usize> = None;
    for a in &q.assertions {
        let (l, r) = integral_sides(a);
        let mut e = to_lin(&(&l - &r), &index);
        let all_int = e.coeffs.keys().all(|i| vars[&names[*i]] == Sort::Int);
        let mut cmp = a.cmp;
        if all_int {
            match cmp {
                Cmp::Lt => {
                    e.constant += Q::one();
                    cmp = Cmp::Le;
                }
                Cmp::Gt => {
                    e.constant -= Q::one();
                    cmp = Cmp::Ge;
                }
                _ => {}
            }
            let g = gcd_of(&e);
            if !g.is_zero() && !g.is_one() {
                let gq = Q::from_integer(g.clone());
                let c = &e.constant / &gq;
                let c = match cmp {
                    Cmp::Le => c.ceil(),
                    Cmp::Ge => c.floor(),
                    _ if !c.is_integer() => return Answer::Unsat,
                    _ => c,
                };
                for v in e.coeffs.values_mut() {
                    *v = &*v / &gq;
                }
                e.constant = c;
            }
        } else if matches!(cmp, Cmp::Lt | Cmp::Gt) {
            let ev = *eps.get_or_insert_with(|| {
                let v = lp.new_var(true);
                let mut cap = LinExpr::var(v);
                cap.constant = -Q::one();
                lp.push(LinCons::le0(cap));
                v
            });
            if cmp == Cmp::Lt {
                e.add_term(ev, Q::one());
                cmp = Cmp::Le;
            } else {
                e.add_term(ev, -Q::one());
                cmp = Cmp::Ge;
            }
        }
        lp.push(match cmp {
            Cmp::Le => LinCons::le0(e),
            Cmp::Ge => LinCons::ge0(e),
            _ => LinCons::eq0(e),
        });
    }
    let point = if !int_vars.is_empty() {
        match lp::solve_int(&lp, &int_vars, cfg.node_limit) {
            lp::IntOutcome::Feasible(x) => x,
            lp::IntOutcome::Infeasible => return Answer::Unsat,
            lp::IntOutcome::Unknown => return Answer::Unknown,
        }
    } else {
        let mut objs: Vec<LinExpr> = Vec::new();
        if let Some(ev) = eps {
            objs.push(LinExpr::var(ev).scaled(&-Q::one()));
        }
        objs.extend(q.minimize.iter().map(|o| to_lin(o, &index)));
        match lp::solve_lex(&lp, &objs) {
            LpOutcome::Optimal(x) => x,
            LpOutcome::Infeasible => return Answer::Unsat,
            LpOutcome::Unbounded => match lp::solve(&lp, None) {
                LpOutcome::Optimal(x) => x,
                LpOutcome::Infeasible => return Answer::Unsat,
                LpOutcome::Unbounded => return Answer::Unknown,
            },
        }
    };
    if let Some(ev) = eps {
        if !point[ev].is_positive() {
            return if int_vars.is_empty() { Answer::Unsat } else { Answer::Unknown };
        }
    }
    Answer::Sat(names.iter().enumerate().map(|(i, n)| (n.clone(), point[i].clone())).collect())
}

const GRID_LIMIT: usize = 200_000;

fn solve_grid(q: &Query, cfg: &SmtConfig) -> Answer {
    let names: Vec<String> = q.all_vars().keys().cloned().collect();
    let k = cfg.grid.len();
    if k == 0 || (k as f64).powi(names.len() as i32) > GRID_LIMIT as f64 {
        return Answer::Unknown;
    }
    let mut idx = vec![0usize; names.len()];
    loop {
        let m: Model = names
            .iter()
            .zip(&idx)
            .map(|(n, &i)| (n.clone(), Q::from_integer(BigInt::from(cfg.grid[i]))))
            .collect();
        if q.check_model(&m) {
            return Answer::Sat(m);
        }
        let mut p = 0;
        loop {
            if p == idx.len() {
                return Answer::Unknown;
            }
            idx[p] += 1;
            if idx[p] < k {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

pub fn solve_external(q: &Query, command: &str, timeout: Duration) -> Result<Answer, SmtError> {
    let env_err = |message: String| SmtError::Environment { command: command.to_string(), message };
    let mut parts = command.split_whitespace();
    let prog = parts.next().ok_or_else(|| env_err("empty command".into()))?;
    let mut child = Command::new(prog)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| env_err(e.to_string()))?;
    let script = q.to_smtlib();
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        let _ = stdin.write_all(script.as_bytes());
    }
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    let status = loop {
        match child.try_wait().map_err(|e| env_err(e.to_string()))? {
            Some(st) => break st,
            None if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(Answer::Unknown);
            }
            None => std::thread::sleep(Duration::from_millis(2)),
        }
    };
    let reply = reader.join().unwrap_or_default();
    if !status.success() && reply.trim().is_empty() {
        return Err(env_err(format!("exited with {status}")));
    }
    parse_reply(&reply)
}

/// Steps of the objective search per objective.
const OBJECTIVE_STEPS: usize = 6;

/// Lexicographic minimization by bisection on each objective's value.
fn minimize_external(q: &Query, command: &str, timeout: Duration) -> Result<Answer, SmtError> {
    let mut base = q.clone();
    base.minimize.clear();
    let mut best = match solve_external(&base, command, timeout)? {
        Answer::Sat(m) if base.check_model(&m) => m,
        other => return Ok(other),
    };
    let value = |o: &QPoly, m: &Model| o.eval_with(|s| Some(m.get(s.name()).cloned().unwrap_or_else(Q::zero)));
    for o in &q.minimize {
        let Some(mut hi) = value(o, &best) else { break };
        let mut lo = Q::zero();
        for _ in 0..OBJECTIVE_STEPS {
            if hi <= lo {
                break;
            }
            let mid = (&lo + &hi) / Q::from_integer(BigInt::from(2));
            let mut probe = base.clone();
            probe.assert(o.clone(), Cmp::Le, QPoly::constant(mid.clone()));
            match solve_external(&probe, command, timeout)? {
                Answer::Sat(m) if probe.check_model(&m) => {
                    hi = value(o, &m).unwrap_or(mid);
                    best = m;
                }
                Answer::Unsat => lo = mid,
                _ => break,
            }
        }
        base.assert(o.clone(), Cmp::Le, QPoly::constant(hi));
    }
    Ok(Answer::Sat(best))
}

fn excerpt(s: &str) -> String {
    s.chars().take(200).collect()
}

/// Parses `sat`/`unsat`/`unknown` followed by an optional model.
pub fn parse_reply(reply: &str) -> Result<Answer, SmtError> {
    let proto = || SmtError::Protocol { excerpt: excerpt(reply) };
    let exprs = sexpr::parse_all(reply).map_err(|_| proto())?;
    let mut it = exprs.iter();
    match it.next().and_then(|e| e.as_atom()) {
        Some("unsat") => Ok(Answer::Unsat),
        Some("unknown") | Some("timeout") => Ok(Answer::Unknown),
        Some("sat") => {
            let mut model = Model::new();
            if let Some(m) = it.next() {
                let entries = m.as_list().ok_or_else(proto)?;
                let entries = if m.head() == Some("model") { &entries[1..] } else { entries };
                for d in entries {
                    let l = d.as_list().ok_or_else(proto)?;
                    if d.head() != Some("define-fun") || l.len() != 5 {
                        return Err(proto());
                    }
                    let name = l[1].as_atom().ok_or_else(proto)?;
                    let v = parse_value(&l[4]).ok_or_else(proto)?;
                    model.insert(name.to_string(), v);
                }
            }
            Ok(Answer::Sat(model))
        }
        _ => Err(proto()),
    }
}

fn parse_value(e: &SExpr) -> Option<Q> {
    match e {
        SExpr::Atom(a) => parse_number(a),
        SExpr::List(l) => match (e.head()?, l.len()) {
            ("-", 2) => Some(-parse_value(&l[1])?),
            ("/", 3) => {
                let d = parse_value(&l[2])?;
                if d.is_zero() {
                    None
                } else {
                    Some(parse_value(&l[1])? / d)
                }
            }
            _ => None,
        },
    }
}

fn int_poly(p: &Polynomial) -> QPoly {
    p.rename(|s| match s {
        Sym::Call(c) => Sym::Var(call_var(c)),
        v => v.clone(),
    })
    .to_rational()
}

/// Integer query asserting the linear atoms of `phi`; nonlinear atoms are dropped.
fn premise_query(phi: &Constraint) -> Query {
    let mut q = Query::new();
    for a in &phi.atoms {
        if a.is_linear() {
            q.assert(int_poly(&a.lhs), Cmp::Lt, int_poly(&a.rhs));
        }
    }
    for v in q.all_vars().keys() {
        q.decls.insert(v.clone(), Sort::Int);
    }
    q
}

fn model_env(m: &Model) -> Option<BTreeMap<Sym, BigInt>> {
    let mut env = BTreeMap::new();
    for (k, v) in m {
        if !v.is_integer() {
            return None;
        }
        let s = match k.strip_prefix('@') {
            Some(c) => Sym::Call(c.to_string()),
            None => Sym::Var(k.clone()),
        };
        env.insert(s, v.to_integer());
    }
    Some(env)
}

/// Whether every integer solution of `phi` satisfies `psi`.
pub fn entails(phi: &Constraint, psi: &Atom, cfg: &SmtConfig) -> Result<Entailment, SmtError> {
    if !psi.is_linear() {
        return Ok(Entailment::Unknown);
    }
    let mut q = premise_query(phi);
    q.assert(int_poly(&psi.rhs), Cmp::Le, int_poly(&psi.lhs));
    for v in q.all_vars().keys() {
        q.decls.insert(v.clone(), Sort::Int);
    }
    Ok(match solve(&q, cfg)? {
        Answer::Unsat => Entailment::Yes,
        Answer::Unknown => Entailment::Unknown,
        Answer::Sat(m) => {
            let counter = model_env(&m).and_then(|env| {
                let mut env = env;
                for s in phi.atoms.iter().chain([psi]).flat_map(|a| a.lhs.syms().into_iter().chain(a.rhs.syms())) {
                    env.entry(s).or_insert_with(BigInt::zero);
                }
                Some(phi.eval_env(&env)? && !psi.eval(&env)?)
            });
            if counter == Some(true) {
                Entailment::No
            } else {
                Entailment::Unknown
            }
        }
    })
}

/// Whether `phi` has an integer solution.
pub fn satisfiable(phi: &Constraint, cfg: &SmtConfig) -> Result<Answer, SmtError> {
    if phi.atoms.iter().all(|a| a.is_linear()) {
        return solve(&premise_query(phi), cfg);
    }
    Ok(match solve(&premise_query(phi), cfg)? {
        Answer::Unsat => Answer::Unsat,
        _ => Answer::Unknown,
    })
}

/// Converts an integer polynomial into a rational one over plain variable names.
pub fn qpoly(p: &Polynomial) -> QPoly {
    int_poly(p)
}
