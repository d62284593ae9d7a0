//! Symbolic bounds: weakly monotone expressions over ℕ ∪ {ω}.
//!
//! `Pow(b, e)` denotes `max(1, b)^e`, which keeps the algebra monotone in the
//! exponent. `Log(k, b)` denotes `⌈log_k(max(1, b))⌉`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::poly::{Polynomial, Sym};

/// Values larger than this many bits evaluate to ω.
pub const SATURATION_BITS: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NatOmega {
    Fin(BigUint),
    Omega,
}

impl PartialOrd for NatOmega {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NatOmega {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (NatOmega::Fin(a), NatOmega::Fin(b)) => a.cmp(b),
            (NatOmega::Fin(_), NatOmega::Omega) => Ordering::Less,
            (NatOmega::Omega, NatOmega::Fin(_)) => Ordering::Greater,
            (NatOmega::Omega, NatOmega::Omega) => Ordering::Equal,
        }
    }
}

impl fmt::Display for NatOmega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatOmega::Fin(n) => write!(f, "{n}"),
            NatOmega::Omega => f.write_str("ω"),
        }
    }
}

impl From<u64> for NatOmega {
    fn from(n: u64) -> Self {
        NatOmega::Fin(BigUint::from(n))
    }
}

fn saturate(n: BigUint) -> NatOmega {
    if n.bits() > SATURATION_BITS {
        NatOmega::Omega
    } else {
        NatOmega::Fin(n)
    }
}

impl NatOmega {
    pub fn zero() -> Self {
        NatOmega::Fin(BigUint::zero())
    }

    pub fn one() -> Self {
        NatOmega::Fin(BigUint::one())
    }

    pub fn is_omega(&self) -> bool {
        matches!(self, NatOmega::Omega)
    }

    pub fn finite(&self) -> Option<&BigUint> {
        match self {
            NatOmega::Fin(n) => Some(n),
            NatOmega::Omega => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NatOmega::Fin(n) if n.is_zero())
    }

    pub fn add(&self, o: &NatOmega) -> NatOmega {
        match (self, o) {
            (NatOmega::Fin(a), NatOmega::Fin(b)) => saturate(a + b),
            _ => NatOmega::Omega,
        }
    }

    /// `0·ω = 0`.
    pub fn mul(&self, o: &NatOmega) -> NatOmega {
        if self.is_zero() || o.is_zero() {
            return NatOmega::zero();
        }
        match (self, o) {
            (NatOmega::Fin(a), NatOmega::Fin(b)) => {
                if a.bits() + b.bits() > SATURATION_BITS + 1 {
                    NatOmega::Omega
                } else {
                    saturate(a * b)
                }
            }
            _ => NatOmega::Omega,
        }
    }

    /// `max(1, self)^e`.
    pub fn pow(&self, e: &NatOmega) -> NatOmega {
        let base = match self {
            NatOmega::Fin(b) if b <= &BigUint::one() => return NatOmega::one(),
            NatOmega::Fin(b) => b,
            NatOmega::Omega => {
                return if e.is_zero() { NatOmega::one() } else { NatOmega::Omega };
            }
        };
        let e = match e {
            NatOmega::Fin(e) => e,
            NatOmega::Omega => return NatOmega::Omega,
        };
        let bits = base.bits();
        match e.to_u64() {
            Some(ev) if ev.saturating_mul(bits.saturating_sub(1)) <= SATURATION_BITS => {
                saturate(num_traits::pow::pow(base.clone(), ev as usize))
            }
            _ => NatOmega::Omega,
        }
    }

    /// `⌈log_k(max(1, self))⌉`.
    pub fn log(&self, k: &BigRational) -> NatOmega {
        match self {
            NatOmega::Omega => NatOmega::Omega,
            NatOmega::Fin(x) => NatOmega::Fin(BigUint::from(ceil_log(k, x))),
        }
    }
}

/// Least `n ≥ 0` with `k^n ≥ max(1, x)`, for rational `k > 1`.
pub fn ceil_log(k: &BigRational, x: &BigUint) -> u64 {
    if x <= &BigUint::one() {
        return 0;
    }
    let p = k.numer().magnitude().clone();
    let q = k.denom().magnitude().clone();
    if q.is_one() && p == BigUint::from(2u32) {
        return (x - BigUint::one()).bits();
    }
    let lk = k.to_f64().unwrap_or(2.0).log2().max(1e-9);
    let est = ((x.bits().saturating_sub(1)) as f64 / lk).floor() as u64;
    let mut n = est.saturating_sub(2);
    loop {
        // p^n ≥ x·q^n
        let lhs = num_traits::pow::pow(p.clone(), n as usize);
        let rhs = x * num_traits::pow::pow(q.clone(), n as usize);
        if lhs >= rhs {
            // step back in case the estimate overshot
            while n > 0 {
                let l = num_traits::pow::pow(p.clone(), (n - 1) as usize);
                let r = x * num_traits::pow::pow(q.clone(), (n - 1) as usize);
                if l >= r {
                    n -= 1;
                } else {
                    break;
                }
            }
            return n;
        }
        n += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Const(NatOmega),
    Var(String),
    Sum(Vec<Bound>),
    Max(Vec<Bound>),
    Prod(Vec<Bound>),
    Pow(Box<Bound>, Box<Bound>),
    Log(BigRational, Box<Bound>),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("no value for `{0}`")]
pub struct EvalError(pub String);

pub type Valuation = BTreeMap<String, BigUint>;

/// Name under which a call symbol appears inside a bound.
pub fn call_var(id: &str) -> String {
    format!("@{id}")
}

impl Bound {
    pub fn nat(n: u64) -> Bound {
        Bound::Const(NatOmega::from(n))
    }

    pub fn big(n: BigUint) -> Bound {
        Bound::Const(NatOmega::Fin(n))
    }

    pub fn zero() -> Bound {
        Bound::nat(0)
    }

    pub fn one() -> Bound {
        Bound::nat(1)
    }

    pub fn omega() -> Bound {
        Bound::Const(NatOmega::Omega)
    }

    pub fn var(v: &str) -> Bound {
        Bound::Var(v.to_string())
    }

    pub fn sum(parts: impl IntoIterator<Item = Bound>) -> Bound {
        Bound::Sum(parts.into_iter().collect()).simplify()
    }

    pub fn prod(parts: impl IntoIterator<Item = Bound>) -> Bound {
        Bound::Prod(parts.into_iter().collect()).simplify()
    }

    pub fn max(parts: impl IntoIterator<Item = Bound>) -> Bound {
        Bound::Max(parts.into_iter().collect()).simplify()
    }

    pub fn pow(base: Bound, exp: Bound) -> Bound {
        Bound::Pow(Box::new(base), Box::new(exp)).simplify()
    }

    pub fn log(k: BigRational, arg: Bound) -> Bound {
        Bound::Log(k, Box::new(arg)).simplify()
    }

    pub fn log2(arg: Bound) -> Bound {
        Bound::log(BigRational::from_integer(BigInt::from(2)), arg)
    }

    pub fn is_omega(&self) -> bool {
        matches!(self, Bound::Const(NatOmega::Omega))
    }

    pub fn as_const(&self) -> Option<&NatOmega> {
        match self {
            Bound::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True if no ω occurs anywhere, so every evaluation is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Bound::Const(c) => !c.is_omega(),
            Bound::Var(_) => true,
            Bound::Sum(xs) | Bound::Max(xs) | Bound::Prod(xs) => xs.iter().all(Bound::is_finite),
            Bound::Pow(b, e) => b.is_finite() && e.is_finite(),
            Bound::Log(_, b) => b.is_finite(),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Bound::Const(_) => {}
            Bound::Var(v) => {
                out.insert(v.clone());
            }
            Bound::Sum(xs) | Bound::Max(xs) | Bound::Prod(xs) => {
                xs.iter().for_each(|x| x.collect_vars(out))
            }
            Bound::Pow(b, e) => {
                b.collect_vars(out);
                e.collect_vars(out);
            }
            Bound::Log(_, b) => b.collect_vars(out),
        }
    }

    pub fn eval(&self, env: &Valuation) -> Result<NatOmega, EvalError> {
        Ok(match self {
            Bound::Const(c) => c.clone(),
            Bound::Var(v) => match env.get(v) {
                Some(n) => NatOmega::Fin(n.clone()),
                None => return Err(EvalError(v.clone())),
            },
            Bound::Sum(xs) => {
                let mut acc = NatOmega::zero();
                for x in xs {
                    acc = acc.add(&x.eval(env)?);
                }
                acc
            }
            Bound::Prod(xs) => {
                let mut acc = NatOmega::one();
                for x in xs {
                    acc = acc.mul(&x.eval(env)?);
                }
                acc
            }
            Bound::Max(xs) => {
                let mut acc = NatOmega::zero();
                for x in xs {
                    acc = acc.max(x.eval(env)?);
                }
                acc
            }
            Bound::Pow(b, e) => b.eval(env)?.pow(&e.eval(env)?),
            Bound::Log(k, b) => b.eval(env)?.log(k),
        })
    }

    /// Evaluation at integer values, taking absolute values first.
    pub fn eval_abs(&self, state: &BTreeMap<String, BigInt>) -> Result<NatOmega, EvalError> {
        let env: Valuation = state.iter().map(|(k, v)| (k.clone(), v.magnitude().clone())).collect();
        self.eval(&env)
    }

    /// Simultaneous substitution of variables.
    pub fn subst(&self, m: &BTreeMap<String, Bound>) -> Bound {
        if m.is_empty() {
            return self.clone();
        }
        match self {
            Bound::Const(_) => self.clone(),
            Bound::Var(v) => m.get(v).cloned().unwrap_or_else(|| self.clone()),
            Bound::Sum(xs) => Bound::Sum(xs.iter().map(|x| x.subst(m)).collect()),
            Bound::Max(xs) => Bound::Max(xs.iter().map(|x| x.subst(m)).collect()),
            Bound::Prod(xs) => Bound::Prod(xs.iter().map(|x| x.subst(m)).collect()),
            Bound::Pow(b, e) => Bound::Pow(Box::new(b.subst(m)), Box::new(e.subst(m))),
            Bound::Log(k, b) => Bound::Log(k.clone(), Box::new(b.subst(m))),
        }
    }

    pub fn subst_simplify(&self, m: &BTreeMap<String, Bound>) -> Bound {
        self.subst(m).simplify()
    }

    /// Lower bound on every evaluation.
    fn min_value(&self) -> NatOmega {
        match self {
            Bound::Const(c) => c.clone(),
            Bound::Var(_) | Bound::Log(..) => NatOmega::zero(),
            Bound::Sum(xs) => xs.iter().fold(NatOmega::zero(), |a, x| a.add(&x.min_value())),
            Bound::Prod(xs) => xs.iter().fold(NatOmega::one(), |a, x| a.mul(&x.min_value())),
            Bound::Max(xs) => xs.iter().map(Bound::min_value).max().unwrap_or(NatOmega::zero()),
            Bound::Pow(b, e) => b.min_value().pow(&e.min_value()),
        }
    }

    pub fn simplify(&self) -> Bound {
        let mut cur = self.clone();
        for _ in 0..32 {
            let next = cur.simplify_once();
            if next == cur {
                return next;
            }
            cur = next;
        }
        cur
    }

    fn simplify_once(&self) -> Bound {
        match self {
            Bound::Const(_) | Bound::Var(_) => self.clone(),
            Bound::Sum(xs) => simplify_sum(xs.iter().map(Bound::simplify_once).collect()),
            Bound::Prod(xs) => simplify_prod(xs.iter().map(Bound::simplify_once).collect()),
            Bound::Max(xs) => simplify_max(xs.iter().map(Bound::simplify_once).collect()),
            Bound::Pow(b, e) => simplify_pow(b.simplify_once(), e.simplify_once()),
            Bound::Log(k, b) => simplify_log(k.clone(), b.simplify_once()),
        }
    }

    /// Splits `c·core` into its constant coefficient and core.
    fn split_coeff(&self) -> (BigUint, Bound) {
        if let Bound::Prod(xs) = self {
            if let Some(Bound::Const(NatOmega::Fin(c))) = xs.first() {
                let rest: Vec<Bound> = xs[1..].to_vec();
                let core = if rest.len() == 1 { rest[0].clone() } else { Bound::Prod(rest) };
                return (c.clone(), core);
            }
        }
        (BigUint::one(), self.clone())
    }

    /// Summands as (coefficient, core) with the constant part separated.
    fn summands(&self) -> (BigUint, Vec<(BigUint, Bound)>) {
        let items: Vec<Bound> = match self {
            Bound::Sum(xs) => xs.clone(),
            other => vec![other.clone()],
        };
        let mut c = BigUint::zero();
        let mut out = Vec::new();
        for it in items {
            match it {
                Bound::Const(NatOmega::Fin(n)) => c += n,
                other => out.push(other.split_coeff()),
            }
        }
        (c, out)
    }

    /// Syntactic check that `self ≤ other` pointwise.
    fn dominated_by(&self, other: &Bound) -> bool {
        if self == other {
            return true;
        }
        if let Bound::Const(c) = self {
            return *c <= other.min_value();
        }
        let (c1, t1) = self.summands();
        let (c2, t2) = other.summands();
        if c1 > c2 {
            return false;
        }
        t1.iter().all(|(k, core)| t2.iter().any(|(k2, core2)| core == core2 && k <= k2))
    }

    pub fn asymptotic_class(&self) -> AsymptoticClass {
        growth(self).class()
    }

    fn is_atomic(&self) -> bool {
        matches!(
            self,
            Bound::Const(_) | Bound::Var(_) | Bound::Log(..) | Bound::Max(_) | Bound::Pow(..)
        )
    }
}

fn simplify_sum(xs: Vec<Bound>) -> Bound {
    let mut flat = Vec::new();
    for x in xs {
        match x {
            Bound::Sum(ys) => flat.extend(ys),
            other => flat.push(other),
        }
    }
    let mut c = BigUint::zero();
    let mut terms: Vec<(BigUint, Bound)> = Vec::new();
    for x in flat {
        match x {
            Bound::Const(NatOmega::Omega) => return Bound::omega(),
            Bound::Const(NatOmega::Fin(n)) => c += n,
            other => {
                let (k, core) = other.split_coeff();
                match terms.iter_mut().find(|(_, t)| *t == core) {
                    Some(entry) => entry.0 += k,
                    None => terms.push((k, core)),
                }
            }
        }
    }
    let mut out: Vec<Bound> = terms
        .into_iter()
        .map(|(k, core)| {
            if k.is_one() {
                core
            } else {
                let mut fs = vec![Bound::big(k)];
                match core {
                    Bound::Prod(ys) => fs.extend(ys),
                    other => fs.push(other),
                }
                Bound::Prod(fs)
            }
        })
        .collect();
    out.sort();
    if !c.is_zero() {
        out.push(Bound::big(c));
    }
    match out.len() {
        0 => Bound::zero(),
        1 => out.pop().unwrap(),
        _ => Bound::Sum(out),
    }
}

fn simplify_prod(xs: Vec<Bound>) -> Bound {
    let mut flat = Vec::new();
    for x in xs {
        match x {
            Bound::Prod(ys) => flat.extend(ys),
            other => flat.push(other),
        }
    }
    let mut c = NatOmega::one();
    let mut rest = Vec::new();
    for x in flat {
        match x {
            Bound::Const(n) => c = c.mul(&n),
            other => rest.push(other),
        }
    }
    if c.is_zero() {
        return Bound::zero();
    }
    // x·max(1,x)^e = max(1,x)^e whenever max(1,x)^e ≥ 1 absorbs nothing; only the 1^e case is safe
    rest.sort();
    if rest.is_empty() {
        return Bound::Const(c);
    }
    let mut out = Vec::new();
    if c != NatOmega::one() {
        out.push(Bound::Const(c));
    }
    out.extend(rest);
    if out.len() == 1 {
        out.pop().unwrap()
    } else {
        Bound::Prod(out)
    }
}

fn simplify_max(xs: Vec<Bound>) -> Bound {
    let mut flat = Vec::new();
    for x in xs {
        match x {
            Bound::Max(ys) => flat.extend(ys),
            other => flat.push(other),
        }
    }
    let mut c = BigUint::zero();
    let mut rest: Vec<Bound> = Vec::new();
    for x in flat {
        match x {
            Bound::Const(NatOmega::Omega) => return Bound::omega(),
            Bound::Const(NatOmega::Fin(n)) => c = c.max(n),
            other => {
                if !rest.contains(&other) {
                    rest.push(other)
                }
            }
        }
    }
    rest.sort();
    let mut kept: Vec<Bound> = Vec::new();
    for (i, x) in rest.iter().enumerate() {
        let dominated = rest.iter().enumerate().any(|(j, y)| {
            j != i && x.dominated_by(y) && (!y.dominated_by(x) || j < i)
        });
        if !dominated {
            kept.push(x.clone());
        }
    }
    let cb = Bound::big(c.clone());
    if !c.is_zero() && !kept.iter().any(|k| cb.dominated_by(k)) {
        kept.push(cb);
    }
    match kept.len() {
        0 => Bound::zero(),
        1 => kept.pop().unwrap(),
        _ => Bound::Max(kept),
    }
}

fn simplify_pow(b: Bound, e: Bound) -> Bound {
    if e.as_const().is_some_and(NatOmega::is_zero) {
        return Bound::one();
    }
    if let Bound::Const(NatOmega::Fin(c)) = &b {
        if c <= &BigUint::one() {
            return Bound::one();
        }
    }
    if let (Bound::Const(bc), Bound::Const(ec)) = (&b, &e) {
        let small = match (bc, ec) {
            (NatOmega::Fin(x), NatOmega::Fin(y)) => {
                y.to_u64().is_some_and(|y| y.saturating_mul(x.bits()) <= 4096)
            }
            _ => true,
        };
        if small {
            return Bound::Const(bc.pow(ec));
        }
    }
    if b.is_omega() && e.min_value() >= NatOmega::one() {
        return Bound::omega();
    }
    if e.is_omega() && b.min_value() >= NatOmega::from(2) {
        return Bound::omega();
    }
    // max(1, max(1, c, …)) drops constants ≤ 1 inside the base
    if let Bound::Max(xs) = &b {
        let ys: Vec<Bound> = xs
            .iter()
            .filter(|x| !matches!(x, Bound::Const(NatOmega::Fin(n)) if n <= &BigUint::one()))
            .cloned()
            .collect();
        if ys.len() < xs.len() {
            return Bound::Pow(Box::new(simplify_max(ys)), Box::new(e));
        }
    }
    if e == Bound::one() && b.min_value() >= NatOmega::one() {
        return b;
    }
    Bound::Pow(Box::new(b), Box::new(e))
}

fn simplify_log(k: BigRational, b: Bound) -> Bound {
    match &b {
        Bound::Const(c) => Bound::Const(c.log(&k)),
        _ => Bound::Log(k, Box::new(b)),
    }
}

/// `⌈p⌉`: the polynomial with absolute coefficients, as a bound.
/// Call symbols become variables named by [`call_var`].
pub fn ceil_poly(p: &Polynomial) -> Bound {
    let mut parts = Vec::new();
    for (m, c) in p.terms() {
        let mut fs = vec![Bound::big(c.magnitude().clone())];
        for (s, e) in m {
            let name = match s {
                Sym::Var(v) => v.clone(),
                Sym::Call(id) => call_var(id),
            };
            for _ in 0..*e {
                fs.push(Bound::Var(name.clone()));
            }
        }
        parts.push(Bound::Prod(fs));
    }
    Bound::Sum(parts).simplify()
}

/// Bound of a polynomial whose coefficients are all nonnegative.
pub fn from_nat_poly(p: &Polynomial) -> Bound {
    debug_assert!(p.has_nonnegative_coeffs());
    ceil_poly(p)
}

fn render(b: &Bound, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match b {
        Bound::Const(c) => write!(f, "{c}"),
        Bound::Var(v) => f.write_str(v),
        Bound::Sum(xs) => {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                render(x, f)?;
            }
            Ok(())
        }
        Bound::Max(xs) => {
            f.write_str("max(")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                render(x, f)?;
            }
            f.write_str(")")
        }
        Bound::Prod(xs) => {
            let mut i = 0;
            let mut first = true;
            while i < xs.len() {
                let mut j = i;
                while j + 1 < xs.len() && xs[j + 1] == xs[i] && matches!(xs[i], Bound::Var(_)) {
                    j += 1;
                }
                if !first {
                    f.write_str("*")?;
                }
                first = false;
                render_factor(&xs[i], f)?;
                if j > i {
                    write!(f, "^{}", j - i + 1)?;
                }
                i = j + 1;
            }
            Ok(())
        }
        Bound::Pow(base, e) => {
            if matches!(**base, Bound::Pow(..)) {
                f.write_str("(")?;
                render(base, f)?;
                f.write_str(")")?;
            } else {
                render_factor(base, f)?;
            }
            f.write_str("^")?;
            if matches!(**e, Bound::Const(_) | Bound::Var(_)) {
                render(e, f)
            } else {
                f.write_str("(")?;
                render(e, f)?;
                f.write_str(")")
            }
        }
        Bound::Log(k, x) => {
            if k.is_integer() {
                write!(f, "log{}(", k.numer())?;
            } else {
                write!(f, "log[{}](", k)?;
            }
            render(x, f)?;
            f.write_str(")")
        }
    }
}

fn render_factor(b: &Bound, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if b.is_atomic() {
        render(b, f)
    } else {
        f.write_str("(")?;
        render(b, f)?;
        f.write_str(")")
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(self, f)
    }
}

impl Serialize for Bound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Growth of `n ↦ b(n, …, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Growth {
    /// `n^k · log(n)^l`
    PolyLog(u32, u32),
    Exp,
    Omega,
}

impl Growth {
    const CONST: Growth = Growth::PolyLog(0, 0);

    fn times(self, o: Growth) -> Growth {
        match (self, o) {
            (Growth::PolyLog(a, b), Growth::PolyLog(c, d)) => Growth::PolyLog(a + c, b + d),
            (x, y) => x.max(y),
        }
    }

    fn scale(self, n: u32) -> Growth {
        match self {
            Growth::PolyLog(a, b) => Growth::PolyLog(a * n, b * n),
            g => g,
        }
    }

    fn class(self) -> AsymptoticClass {
        match self {
            Growth::PolyLog(0, 0) => AsymptoticClass::Const,
            Growth::PolyLog(0, 1) => AsymptoticClass::Log,
            Growth::PolyLog(0, _) => AsymptoticClass::Poly(1),
            Growth::PolyLog(k, 0) => AsymptoticClass::Poly(k),
            Growth::PolyLog(k, _) => AsymptoticClass::PolyLog(k),
            Growth::Exp => AsymptoticClass::Exp,
            Growth::Omega => AsymptoticClass::Omega,
        }
    }
}

fn const_value(b: &Bound) -> Option<NatOmega> {
    if b.vars().is_empty() {
        b.eval(&Valuation::new()).ok()
    } else {
        None
    }
}

fn growth(b: &Bound) -> Growth {
    if !b.is_finite() {
        return Growth::Omega;
    }
    match b {
        Bound::Const(_) => Growth::CONST,
        Bound::Var(_) => Growth::PolyLog(1, 0),
        Bound::Sum(xs) | Bound::Max(xs) => xs.iter().map(growth).max().unwrap_or(Growth::CONST),
        Bound::Prod(xs) => xs.iter().map(growth).fold(Growth::CONST, Growth::times),
        Bound::Pow(base, e) => match const_value(e) {
            Some(NatOmega::Fin(n)) => match n.to_u32() {
                Some(n) => growth(base).scale(n),
                None => Growth::Exp,
            },
            Some(NatOmega::Omega) => Growth::Omega,
            None => match const_value(base) {
                Some(NatOmega::Fin(c)) if c <= BigUint::one() => Growth::CONST,
                _ => Growth::Exp,
            },
        },
        Bound::Log(_, x) => log_growth(x),
    }
}

/// Growth of `log(b)`.
fn log_growth(b: &Bound) -> Growth {
    match b {
        Bound::Const(_) => Growth::CONST,
        Bound::Var(_) | Bound::Log(..) => Growth::PolyLog(0, 1),
        Bound::Sum(xs) | Bound::Max(xs) | Bound::Prod(xs) => {
            xs.iter().map(log_growth).max().unwrap_or(Growth::CONST)
        }
        Bound::Pow(base, e) => {
            let lb = log_growth(base);
            if lb == Growth::CONST {
                growth(e)
            } else {
                growth(e).times(lb)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AsymptoticClass {
    Const,
    Log,
    Poly(u32),
    /// `n^k` times a polylogarithmic factor.
    PolyLog(u32),
    Exp,
    Omega,
}

impl AsymptoticClass {
    /// Complexity-competition style rendering: `1`, `log(n)`, `n`, `n^k`, `EXP`, `?`.
    pub fn worst_case(&self) -> String {
        match self {
            AsymptoticClass::Const => "1".into(),
            AsymptoticClass::Log => "log(n)".into(),
            AsymptoticClass::Poly(1) => "n".into(),
            AsymptoticClass::Poly(k) => format!("n^{k}"),
            AsymptoticClass::PolyLog(k) => format!("n^{}", k + 1),
            AsymptoticClass::Exp => "EXP".into(),
            AsymptoticClass::Omega => "?".into(),
        }
    }
}

impl fmt::Display for AsymptoticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsymptoticClass::PolyLog(k) => write!(f, "O(n^{k}·log n)"),
            AsymptoticClass::Omega => f.write_str("ω"),
            other => write!(f, "O({})", other.worst_case()),
        }
    }
}

/// `true` if `a ≤ b` at every given valuation.
pub fn le_on(a: &Bound, b: &Bound, samples: &[Valuation]) -> bool {
    samples.iter().all(|s| match (a.eval(s), b.eval(s)) {
        (Ok(x), Ok(y)) => x <= y,
        _ => false,
    })
}

/// Grid of valuations over the given variables with values drawn from `values`.
pub fn sample_grid(vars: &BTreeSet<String>, values: &[u64]) -> Vec<Valuation> {
    let mut out = vec![Valuation::new()];
    for v in vars {
        let mut next = Vec::new();
        for s in &out {
            for &x in values {
                let mut s2 = s.clone();
                s2.insert(v.clone(), BigUint::from(x));
                next.push(s2);
            }
        }
        out = next;
    }
    out
}
