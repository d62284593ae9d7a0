//! Triangular weakly non-linear self-loops: closed forms and local runtime bounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{ceil_poly, Bound, NatOmega};
use crate::interp::abs_valuation;
use crate::its::{state_env, Atom, Constraint, Program, State, Transition};
use crate::poly::{Polynomial, QPoly, Sym};
use crate::smt::{self, Answer, SmtConfig, SmtError};

type Q = BigRational;

/// `Σ coeff·n^degree·base^n`, keyed by `(base, degree)` in ascending order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PolyExp {
    pub summands: BTreeMap<(BigInt, u32), QPoly>,
}

impl PolyExp {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(coeff: QPoly, degree: u32, base: BigInt) -> Self {
        let mut p = Self::zero();
        p.add_term(coeff, degree, base);
        p
    }

    pub fn constant(coeff: QPoly) -> Self {
        Self::term(coeff, 0, BigInt::one())
    }

    fn add_term(&mut self, coeff: QPoly, degree: u32, base: BigInt) {
        // n^d·0^n vanishes for every n when d > 0
        if coeff.is_zero() || (base.is_zero() && degree > 0) {
            return;
        }
        let key = (base, degree);
        let e = self.summands.entry(key.clone()).or_insert_with(QPoly::zero);
        *e = &*e + &coeff;
        if e.is_zero() {
            self.summands.remove(&key);
        }
    }

    pub fn add(&self, o: &PolyExp) -> PolyExp {
        let mut r = self.clone();
        for ((b, d), c) in &o.summands {
            r.add_term(c.clone(), *d, b.clone());
        }
        r
    }

    pub fn scale(&self, k: &QPoly) -> PolyExp {
        let mut r = Self::zero();
        for ((b, d), c) in &self.summands {
            r.add_term(c * k, *d, b.clone());
        }
        r
    }

    pub fn mul(&self, o: &PolyExp) -> PolyExp {
        let mut r = Self::zero();
        for ((b1, d1), c1) in &self.summands {
            for ((b2, d2), c2) in &o.summands {
                r.add_term(c1 * c2, d1 + d2, b1 * b2);
            }
        }
        r
    }

    pub fn len(&self) -> usize {
        self.summands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summands.is_empty()
    }

    /// Summands in ascending growth order.
    pub fn ordered(&self) -> Vec<(&QPoly, u32, &BigInt)> {
        self.summands.iter().map(|((b, d), c)| (c, *d, b)).collect()
    }

    /// Value after `n` iterations from `x` (with `0^0 = 1`).
    pub fn eval(&self, n: u64, x: &BTreeMap<Sym, Q>) -> Option<Q> {
        let mut acc = Q::zero();
        for ((b, d), c) in &self.summands {
            let cv = c.eval_with(|s| x.get(s).cloned())?;
            let nn = BigInt::from(n).pow(*d);
            let bn = num_traits::pow(b.clone(), n as usize);
            acc += cv * Q::from_integer(nn * bn);
        }
        Some(acc)
    }

    /// Least common denominator of all coefficients.
    pub fn denominator(&self) -> BigInt {
        let mut l = BigInt::one();
        for c in self.summands.values() {
            for (_, k) in c.terms() {
                l = l.lcm(k.denom());
            }
        }
        l
    }
}

impl fmt::Display for PolyExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.summands.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for ((b, d), c) in &self.summands {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let mut factors: Vec<String> = Vec::new();
            if *d > 0 {
                factors.push(if *d == 1 { "n".to_string() } else { format!("n^{d}") });
            }
            if !b.is_one() {
                factors.push(format!("{b}^n"));
            }
            let unit = c.as_constant().is_some_and(|k| k.is_one());
            if !unit || factors.is_empty() {
                factors.insert(0, if c.num_terms() > 1 { format!("({c})") } else { c.to_string() });
            }
            let s = factors.join("*");
            f.write_str(&s)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwnLoop {
    pub guard: Constraint,
    pub update: BTreeMap<String, Polynomial>,
    /// Triangular variable order.
    pub order: Vec<String>,
}

/// Recognizes call-free self-loops with a triangular, weakly non-linear update.
pub fn as_twn(t: &Transition) -> Option<TwnLoop> {
    if t.source != t.target || t.has_calls() {
        return None;
    }
    let vars: Vec<String> = t.eta.keys().cloned().collect();
    let mut deps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (v, p) in &t.eta {
        let s = Sym::Var(v.clone());
        if p.degree_in(&s) > 1 {
            return None;
        }
        // the own variable may only occur as a bare linear term
        for (m, _) in p.terms() {
            if m.contains_key(&s) && m.len() > 1 {
                return None;
            }
        }
        let mut d = p.vars();
        d.remove(v);
        deps.insert(v.clone(), d);
    }
    let mut order = Vec::new();
    let mut done: BTreeSet<String> = BTreeSet::new();
    while order.len() < vars.len() {
        let next = vars.iter().find(|v| !done.contains(*v) && deps[*v].iter().all(|d| done.contains(d) || !deps.contains_key(d)))?;
        done.insert(next.clone());
        order.push(next.clone());
    }
    Some(TwnLoop { guard: t.guard.clone(), update: t.eta.clone(), order })
}

fn binom(n: u32, k: u32) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

fn qv(n: &BigInt) -> Q {
    Q::from_integer(n.clone())
}

/// Particular solution of `c(n+1) = a·c(n) + p·n^k·b^n`.
fn particular(a: &BigInt, p: &QPoly, k: u32, b: &BigInt) -> Option<PolyExp> {
    if b.is_zero() {
        // forcing p·[n = 0]
        if a.is_zero() {
            return None;
        }
        let s = p.scale(&(Q::one() / qv(a)));
        let mut r = PolyExp::term(s.clone(), 0, a.clone());
        r = r.add(&PolyExp::term(-s, 0, BigInt::zero()));
        return Some(r);
    }
    let mut d: Vec<QPoly> = vec![QPoly::zero(); k as usize + 2];
    if b != a {
        // b·Σ d_i (n+1)^i − a·Σ d_i n^i = p·n^k
        let diff = qv(b) - qv(a);
        for i in (0..=k).rev() {
            let mut rhs = if i == k { p.clone() } else { QPoly::zero() };
            for j in (i + 1)..=k {
                rhs = &rhs - &d[j as usize].scale(&(qv(b) * qv(&binom(j, i))));
            }
            d[i as usize] = rhs.scale(&(Q::one() / diff.clone()));
        }
    } else {
        // b·Σ_{i≥1} d_i ((n+1)^i − n^i) = p·n^k
        for m in (0..=k).rev() {
            let mut rhs = if m == k { p.clone() } else { QPoly::zero() };
            for i in (m + 2)..=(k + 1) {
                rhs = &rhs - &d[i as usize].scale(&(qv(b) * qv(&binom(i, m))));
            }
            d[m as usize + 1] = rhs.scale(&(Q::one() / (qv(b) * Q::from_integer(BigInt::from(m + 1)))));
        }
    }
    let mut r = PolyExp::zero();
    for (i, c) in d.into_iter().enumerate() {
        r = r.add(&PolyExp::term(c, i as u32, b.clone()));
    }
    Some(r)
}

/// Substitutes closed forms into a polynomial over the loop variables.
pub fn substitute(p: &QPoly, cf: &BTreeMap<String, PolyExp>) -> PolyExp {
    let mut r = PolyExp::zero();
    for (m, c) in p.terms() {
        let mut t = PolyExp::constant(QPoly::constant(c.clone()));
        for (s, e) in m {
            let base = match cf.get(s.name()) {
                Some(x) => x.clone(),
                None => PolyExp::constant(QPoly::sym(s.clone())),
            };
            for _ in 0..*e {
                t = t.mul(&base);
            }
        }
        r = r.add(&t);
    }
    r
}

pub fn closed_form(lp: &TwnLoop) -> Option<BTreeMap<String, PolyExp>> {
    let mut cf: BTreeMap<String, PolyExp> = BTreeMap::new();
    for v in &lp.order {
        let eta = &lp.update[v];
        let s = Sym::Var(v.clone());
        let a = eta.linear_coeff(&s);
        let rest = (eta - &Polynomial::sym(s.clone()).scale(&a)).to_rational();
        let q = substitute(&rest, &cf);
        let mut part = PolyExp::zero();
        for ((b, k), p) in &q.summands {
            part = part.add(&particular(&a, p, *k, b)?);
        }
        // homogeneous coefficient fixed by c(0) = x
        let mut at0 = QPoly::zero();
        for ((_, d), c) in &part.summands {
            if *d == 0 {
                at0 = &at0 + c;
            }
        }
        let h = &QPoly::var(v) - &at0;
        cf.insert(v.clone(), part.add(&PolyExp::term(h, 0, a)));
    }
    Some(cf)
}

/// Each guard atom `lhs < rhs` as the PolyExp of `rhs - lhs > 0`.
pub fn guard_polyexp(lp: &TwnLoop, cf: &BTreeMap<String, PolyExp>) -> Vec<(Atom, PolyExp)> {
    lp.guard
        .atoms
        .iter()
        .map(|a| (a.clone(), substitute(&a.gap().to_rational(), cf)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Yes,
    No,
    Unknown,
}

fn int_poly(p: &QPoly, scale: &BigInt) -> Polynomial {
    p.scale(&qv(scale)).to_integer().expect("scaled by the denominator")
}

/// Sound partial termination check by case analysis on leading coefficients.
pub fn twn_terminates(lp: &TwnLoop, cfg: &SmtConfig) -> Result<Termination, SmtError> {
    let Some(cf) = closed_form(lp) else { return Ok(Termination::Unknown) };
    let pes = guard_polyexp(lp, &cf);
    // per atom: the alternatives under which it stays positive eventually
    let mut options: Vec<Vec<Vec<Atom>>> = Vec::new();
    for (_, pe) in &pes {
        if pe.summands.keys().any(|(b, _)| b.is_negative()) {
            return Ok(Termination::Unknown);
        }
        let d = pe.denominator();
        let live: Vec<Polynomial> = pe.ordered().into_iter().filter(|(_, _, b)| !b.is_zero()).map(|(c, _, _)| int_poly(c, &d)).collect();
        let mut alts = Vec::new();
        let mut zeros: Vec<Atom> = Vec::new();
        for p in live.iter().rev() {
            let mut alt = zeros.clone();
            alt.push(Atom::lt(Polynomial::zero(), p.clone()));
            alts.push(alt);
            zeros.push(Atom::lt(p.clone(), Polynomial::int(1)));
            zeros.push(Atom::lt(Polynomial::int(-1), p.clone()));
        }
        if alts.is_empty() {
            // atom is constantly non-positive from the second iteration on
            return Ok(Termination::Yes);
        }
        options.push(alts);
    }
    let mut idx = vec![0usize; options.len()];
    loop {
        let mut atoms = lp.guard.atoms.clone();
        for (o, &i) in options.iter().zip(&idx) {
            atoms.extend(o[i].iter().cloned());
        }
        match smt::satisfiable(&Constraint::new(atoms), cfg)? {
            Answer::Unsat => {}
            _ => return Ok(Termination::Unknown),
        }
        let mut p = 0;
        loop {
            if p == idx.len() {
                return Ok(Termination::Yes);
            }
            idx[p] += 1;
            if idx[p] < options[p].len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// Sum of the non-leading coefficients of each atom, scaled to integers; maximum over atoms.
fn coefficient_mass(pes: &[(Atom, PolyExp)]) -> Bound {
    let mut per_atom = Vec::new();
    for (_, pe) in pes {
        let d = pe.denominator();
        let live: Vec<&QPoly> = pe.ordered().into_iter().filter(|(_, _, b)| !b.is_zero()).map(|(c, _, _)| c).collect();
        let n = live.len();
        let parts: Vec<Bound> = live.into_iter().take(n.saturating_sub(1)).map(|c| ceil_poly(&int_poly(c, &d))).collect();
        per_atom.push(Bound::sum(parts));
    }
    Bound::max(per_atom)
}

const SCAN_LIMIT: u64 = 1 << 16;

/// Least `N ≥ 1` with `n^{d2}·b2^n ≥ n^{d1+1}·b1^n` for all `n ≥ N`.
fn dominance_start(b1: &BigInt, d1: u32, b2: &BigInt, d2: u32) -> Option<u64> {
    let holds = |n: u64| {
        let nn = BigInt::from(n);
        nn.pow(d2) * num_traits::pow(b2.clone(), n as usize) >= nn.pow(d1 + 1) * num_traits::pow(b1.clone(), n as usize)
    };
    if b1 == b2 {
        return if d2 > d1 { Some(1) } else { None };
    }
    if b2 < b1 {
        return None;
    }
    // log-ratio is increasing beyond n*
    let ratio = (b2.to_f64()? / b1.to_f64()?).ln();
    let gap = d1 as f64 + 1.0 - d2 as f64;
    let nstar = if gap > 0.0 { (gap / ratio).ceil().max(1.0) as u64 } else { 1 };
    let mut last_fail = 0;
    let mut n = 1;
    while n <= nstar.max(1) + 1 {
        if !holds(n) {
            last_fail = n;
        }
        n += 1;
    }
    while !holds(n) {
        last_fail = n;
        n += 1;
        if n > SCAN_LIMIT {
            return None;
        }
    }
    Some(last_fail + 1)
}

fn live_summands(pe: &PolyExp) -> Vec<(u32, BigInt)> {
    pe.summands.keys().filter(|(b, _)| !b.is_zero()).map(|(b, d)| (*d, b.clone())).collect()
}

/// `2·max_α Σ_{j<k} ⌈p_{α,j}⌉ + c`.
pub fn twn_poly_bound(lp: &TwnLoop, cfg: &SmtConfig) -> Result<Option<Bound>, SmtError> {
    if twn_terminates(lp, cfg)? != Termination::Yes {
        return Ok(None);
    }
    let Some(cf) = closed_form(lp) else { return Ok(None) };
    let pes = guard_polyexp(lp, &cf);
    let mut c: u64 = 1;
    for (_, pe) in &pes {
        let live = live_summands(pe);
        for j in 0..live.len() {
            for i in 0..j {
                let Some(n0) = dominance_start(&live[i].1, live[i].0, &live[j].1, live[j].0) else { return Ok(None) };
                c = c.max(n0);
            }
        }
    }
    let m = coefficient_mass(&pes);
    Ok(Some(Bound::sum([Bound::prod([Bound::nat(2), m]), Bound::nat(c)]).simplify()))
}

/// `c′·log2(max_α Σ_{j<k} ⌈p_{α,j}⌉) + 1` when every atom has strictly increasing bases.
pub fn twn_log_bound(lp: &TwnLoop, cfg: &SmtConfig) -> Result<Option<Bound>, SmtError> {
    let Some(cf) = closed_form(lp) else { return Ok(None) };
    let pes = guard_polyexp(lp, &cf);
    let mut min_ratio: Option<f64> = None;
    for (_, pe) in &pes {
        let live = live_summands(pe);
        for w in live.windows(2) {
            let ((d1, b1), (d2, b2)) = (&w[0], &w[1]);
            if b1 == b2 || d2 < d1 || b1.is_negative() {
                return Ok(None);
            }
            let r = b2.to_f64().unwrap_or(f64::INFINITY) / b1.to_f64().unwrap_or(1.0);
            min_ratio = Some(min_ratio.map_or(r, |m: f64| m.min(r)));
        }
    }
    if twn_terminates(lp, cfg)? != Termination::Yes {
        return Ok(None);
    }
    let cprime = match min_ratio {
        None => 1,
        Some(r) => (1.0 / r.log2()).ceil().max(1.0) as u64,
    };
    let m = coefficient_mass(&pes);
    Ok(Some(Bound::sum([Bound::prod([Bound::nat(cprime), Bound::log2(m)]), Bound::one()]).simplify()))
}

/// Number of loop iterations from `sigma`, or `None` when `cap` is reached.
pub fn iterate(lp: &TwnLoop, sigma: &State, cap: u64) -> Option<u64> {
    let mut s = sigma.clone();
    for n in 0..=cap {
        if !lp.guard.eval(&s) {
            return Some(n);
        }
        let env = state_env(&s);
        s = lp.update.iter().map(|(v, p)| (v.clone(), p.eval_map(&env).expect("closed update"))).collect();
    }
    None
}

/// Checks a bound against iterated runs from sampled states with `|values| ≤ range`.
pub fn validate_bound(lp: &TwnLoop, bound: &Bound, range: i64, samples: usize, seed: u64) -> bool {
    let vars: Vec<String> = lp.update.keys().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<State> = Vec::new();
    // small corner values first
    for v in [0i64, 1, 2, range] {
        states.push(vars.iter().map(|x| (x.clone(), BigInt::from(v))).collect());
    }
    for _ in 0..samples {
        states.push(vars.iter().map(|x| (x.clone(), BigInt::from(rng.gen_range(-range..=range)))).collect());
    }
    for s in states {
        let Ok(NatOmega::Fin(b)) = bound.eval(&abs_valuation(&s)) else { continue };
        let cap = b.to_u64().unwrap_or(u64::MAX).min(100_000);
        match iterate(lp, &s, cap) {
            Some(n) if num_bigint::BigUint::from(n) <= b => {}
            _ => return false,
        }
    }
    true
}

/// Best validated twn bound for transition `t`: logarithmic first, then polynomial.
pub fn twn_local_bound(prog: &Program, t: usize, cfg: &SmtConfig) -> Result<Option<Bound>, SmtError> {
    let Some(lp) = as_twn(&prog.transitions[t]) else { return Ok(None) };
    for b in [twn_log_bound(&lp, cfg)?, twn_poly_bound(&lp, cfg)?].into_iter().flatten() {
        if validate_bound(&lp, &b, 64, 300, t as u64) {
            return Ok(Some(b));
        }
    }
    Ok(None)
}
