//! Per-location interval invariants, conjoined into guards before analysis.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::its::{Atom, Location, Program};
use crate::poly::{Polynomial, Sym};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ext {
    NegInf,
    Fin(BigInt),
    PosInf,
}

impl Ext {
    fn mul(&self, o: &Ext) -> Ext {
        use Ext::*;
        match (self, o) {
            (Fin(a), Fin(b)) => Fin(a * b),
            (Fin(a), x) | (x, Fin(a)) => {
                if a.is_zero() {
                    Fin(BigInt::zero())
                } else if a.is_positive() {
                    x.clone()
                } else {
                    x.neg()
                }
            }
            (NegInf, NegInf) | (PosInf, PosInf) => PosInf,
            _ => NegInf,
        }
    }

    fn neg(&self) -> Ext {
        match self {
            Ext::NegInf => Ext::PosInf,
            Ext::PosInf => Ext::NegInf,
            Ext::Fin(a) => Ext::Fin(-a),
        }
    }
}

/// Integer interval; `lo > hi` never occurs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<BigInt>,
    pub hi: Option<BigInt>,
}

impl Interval {
    pub fn top() -> Self {
        Interval { lo: None, hi: None }
    }

    pub fn point(c: BigInt) -> Self {
        Interval { lo: Some(c.clone()), hi: Some(c) }
    }

    fn from_ext(lo: Ext, hi: Ext) -> Option<Self> {
        let lo = match lo {
            Ext::Fin(a) => Some(a),
            Ext::NegInf => None,
            Ext::PosInf => return None,
        };
        let hi = match hi {
            Ext::Fin(a) => Some(a),
            Ext::PosInf => None,
            Ext::NegInf => return None,
        };
        let iv = Interval { lo, hi };
        iv.nonempty().then_some(iv)
    }

    fn lo_ext(&self) -> Ext {
        self.lo.clone().map_or(Ext::NegInf, Ext::Fin)
    }

    fn hi_ext(&self) -> Ext {
        self.hi.clone().map_or(Ext::PosInf, Ext::Fin)
    }

    fn nonempty(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        }
    }

    pub fn contains(&self, x: &BigInt) -> bool {
        self.lo.as_ref().is_none_or(|l| l <= x) && self.hi.as_ref().is_none_or(|h| x <= h)
    }

    fn add(&self, o: &Interval) -> Interval {
        let lo = match (&self.lo, &o.lo) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let hi = match (&self.hi, &o.hi) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Interval { lo, hi }
    }

    fn mul(&self, o: &Interval) -> Interval {
        let cands = [
            self.lo_ext().mul(&o.lo_ext()),
            self.lo_ext().mul(&o.hi_ext()),
            self.hi_ext().mul(&o.lo_ext()),
            self.hi_ext().mul(&o.hi_ext()),
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Interval::from_ext(lo, hi).expect("product of nonempty intervals")
    }

    pub fn join(&self, o: &Interval) -> Interval {
        let lo = match (&self.lo, &o.lo) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            _ => None,
        };
        let hi = match (&self.hi, &o.hi) {
            (Some(a), Some(b)) => Some(a.max(b).clone()),
            _ => None,
        };
        Interval { lo, hi }
    }

    fn meet(&self, o: &Interval) -> Option<Interval> {
        let lo = match (&self.lo, &o.lo) {
            (Some(a), Some(b)) => Some(a.max(b).clone()),
            (a, b) => a.clone().or(b.clone()),
        };
        let hi = match (&self.hi, &o.hi) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            (a, b) => a.clone().or(b.clone()),
        };
        let iv = Interval { lo, hi };
        iv.nonempty().then_some(iv)
    }

    /// Widening with thresholds 1 and 0 on the lower bound, 0 on the upper.
    fn widen(&self, new: &Interval) -> Interval {
        let lo = match (&self.lo, &new.lo) {
            (Some(a), Some(b)) if b >= a => Some(a.clone()),
            (_, Some(b)) if *b >= BigInt::one() => Some(BigInt::one()),
            (_, Some(b)) if !b.is_negative() => Some(BigInt::zero()),
            _ => None,
        };
        let hi = match (&self.hi, &new.hi) {
            (Some(a), Some(b)) if b <= a => Some(a.clone()),
            (_, Some(b)) if !b.is_positive() => Some(BigInt::zero()),
            _ => None,
        };
        Interval { lo, hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = self.lo.as_ref().map_or("-inf".to_string(), |a| a.to_string());
        let hi = self.hi.as_ref().map_or("inf".to_string(), |a| a.to_string());
        write!(f, "[{lo}, {hi}]")
    }
}

pub type Env = BTreeMap<String, Interval>;

fn eval_poly(p: &Polynomial, env: &Env, calls: &BTreeMap<String, Interval>) -> Interval {
    let mut acc = Interval::point(BigInt::zero());
    for (m, c) in p.terms() {
        let mut t = Interval::point(c.clone());
        for (s, e) in m {
            let iv = match s {
                Sym::Var(v) => env.get(v).cloned().unwrap_or_else(Interval::top),
                Sym::Call(id) => calls.get(id).cloned().unwrap_or_else(Interval::top),
            };
            for _ in 0..*e {
                t = t.mul(&iv);
            }
        }
        acc = acc.add(&t);
    }
    acc
}

/// Narrows `env` by a linear atom; `None` when the atom cannot hold.
fn refine(env: &mut Env, a: &Atom) -> Option<()> {
    let g = a.gap();
    if !g.is_linear() {
        return Some(());
    }
    let none = BTreeMap::new();
    if g.is_constant() {
        return (g.constant_term() >= BigInt::one()).then_some(());
    }
    // g >= 1, so c*v >= 1 - max(rest)
    for v in g.vars() {
        let c = g.linear_coeff(&Sym::var(&v));
        let rest = &g - &Polynomial::var(&v).scale(&c);
        let Some(rmax) = eval_poly(&rest, env, &none).hi else { continue };
        let need = BigInt::one() - rmax;
        let bound = if c.is_positive() {
            Interval { lo: Some(need.div_ceil(&c)), hi: None }
        } else {
            Interval { lo: None, hi: Some(need.div_floor(&c)) }
        };
        let cur = env.get(&v).cloned().unwrap_or_else(Interval::top);
        env.insert(v, cur.meet(&bound)?);
    }
    Some(())
}

fn guarded(prog: &Program, env: &Env, t: usize) -> Option<Env> {
    let mut env = env.clone();
    for _ in 0..2 {
        for a in &prog.transitions[t].guard.atoms {
            refine(&mut env, a)?;
        }
    }
    Some(env)
}

const WIDEN_AFTER: usize = 3;
const MAX_ROUNDS: usize = 200;

/// Interval facts per reachable location (absent = unreachable).
pub fn infer(prog: &Program) -> BTreeMap<Location, Env> {
    let top: Env = prog.variables.iter().map(|v| (v.clone(), Interval::top())).collect();
    let mut inv: BTreeMap<Location, Env> = BTreeMap::new();
    inv.insert(prog.initial.clone(), top.clone());
    let mut visits: BTreeMap<Location, usize> = BTreeMap::new();
    for _ in 0..MAX_ROUNDS {
        // call results range over the return variable at any return location
        let mut ret: Option<Interval> = None;
        for (l, v) in &prog.returns {
            if let Some(e) = inv.get(l) {
                ret = Some(ret.map_or(e[v].clone(), |r| r.join(&e[v])));
            }
        }
        // until some return location is reached, updates with calls cannot complete
        let calls: Option<BTreeMap<String, Interval>> =
            ret.map(|r| prog.calls.iter().map(|c| (c.id.clone(), r.clone())).collect());
        let mut incoming: BTreeMap<Location, Env> = BTreeMap::new();
        let mut push = |l: &Location, e: Env| {
            let merged = match incoming.get(l) {
                Some(old) => old.iter().map(|(v, iv)| (v.clone(), iv.join(&e[v]))).collect(),
                None => e,
            };
            incoming.insert(l.clone(), merged);
        };
        push(&prog.initial, top.clone());
        for (i, t) in prog.transitions.iter().enumerate() {
            let Some(src) = inv.get(&t.source) else { continue };
            let Some(env) = guarded(prog, src, i) else { continue };
            if !t.has_calls() || calls.is_some() {
                let none = BTreeMap::new();
                let cs = calls.as_ref().unwrap_or(&none);
                let out: Env = t.eta.iter().map(|(v, p)| (v.clone(), eval_poly(p, &env, cs))).collect();
                push(&t.target, out);
            }
            for cid in t.calls() {
                let c = prog.call(&cid).unwrap();
                let args: Env = c.zeta.iter().map(|(v, p)| (v.clone(), eval_poly(p, &env, &BTreeMap::new()))).collect();
                push(&c.target, args);
            }
        }
        let mut changed = false;
        for (l, e) in incoming {
            let next = match inv.get(&l) {
                Some(old) => {
                    let n = visits.entry(l.clone()).or_default();
                    *n += 1;
                    let joined: Env = old.iter().map(|(v, iv)| (v.clone(), iv.join(&e[v]))).collect();
                    if *n > WIDEN_AFTER {
                        old.iter().map(|(v, iv)| (v.clone(), iv.widen(&joined[v]))).collect()
                    } else {
                        joined
                    }
                }
                None => e,
            };
            if inv.get(&l) != Some(&next) {
                inv.insert(l, next);
                changed = true;
            }
        }
        if !changed {
            return inv;
        }
    }
    // no fixpoint within the round limit: keep only what is trivially sound
    prog.locations.iter().map(|l| (l.clone(), top.clone())).collect()
}

/// Atoms `v > 0`, `v >= 0`, `v <= 0` and `v = c` implied by an interval.
pub fn facts(env: &Env) -> Vec<Atom> {
    let mut out = Vec::new();
    for (v, iv) in env {
        let x = Polynomial::var(v);
        if let (Some(a), Some(b)) = (&iv.lo, &iv.hi) {
            if a == b {
                out.push(Atom::le(x.clone(), Polynomial::constant(a.clone())));
                out.push(Atom::le(Polynomial::constant(a.clone()), x));
                continue;
            }
        }
        if let Some(a) = &iv.lo {
            if a.is_positive() {
                out.push(Atom::lt(Polynomial::int(0), x.clone()));
            } else if a.is_zero() {
                out.push(Atom::le(Polynomial::int(0), x.clone()));
            }
        }
        if let Some(b) = &iv.hi {
            if !b.is_positive() {
                out.push(Atom::le(x, Polynomial::int(0)));
            }
        }
    }
    out
}

/// Copy of the program whose guards are strengthened by the inferred facts.
/// Transitions leaving unreachable locations get the guard `0 < 0`.
pub fn strengthen(prog: &Program) -> Program {
    let inv = infer(prog);
    let mut out = prog.clone();
    for t in &mut out.transitions {
        let extra = match inv.get(&t.source) {
            Some(env) => facts(env),
            None => vec![Atom::lt(Polynomial::int(0), Polynomial::int(0))],
        };
        for a in extra {
            if !t.guard.atoms.contains(&a) {
                t.guard.atoms.push(a);
            }
        }
    }
    out
}
