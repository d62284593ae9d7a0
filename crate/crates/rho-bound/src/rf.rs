//! Linear ranking functions and function-call ranking triples via Farkas' lemma.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::bounds::{ceil_poly, Bound};
use crate::its::{Atom, Constraint, Location, Program};
use crate::poly::{Polynomial, QPoly, Sym};
use crate::smt::{self, Answer, Cmp, Entailment, Query, SmtConfig, SmtError, Sort};

type Q = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RfError {
    #[error("empty subprogram")]
    EmptySubprogram,
    #[error("transition {0} is not part of the subprogram")]
    NotInSubprogram(String),
    #[error("subprogram has recursive calls")]
    HasRecursiveCalls,
    #[error(transparent)]
    Smt(#[from] SmtError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursiveParts {
    /// Source locations of the subprogram.
    pub locations: BTreeSet<Location>,
    pub rec_calls: BTreeSet<String>,
    pub rec_transitions: BTreeSet<usize>,
    pub nfc: usize,
}

pub fn recursive_parts(prog: &Program, tp: &BTreeSet<usize>) -> Result<RecursiveParts, RfError> {
    if tp.is_empty() {
        return Err(RfError::EmptySubprogram);
    }
    let locations = prog.sources(tp);
    let into_l = prog.funs_of_locations(&locations);
    let rec_calls: BTreeSet<String> = prog.funs_of_transitions(tp).intersection(&into_l).cloned().collect();
    let rec_transitions: BTreeSet<usize> = prog.trans_of_set(&into_l).intersection(tp).copied().collect();
    let nfc = tp.iter().map(|&t| prog.transitions[t].num_calls_into(&into_l)).max().unwrap_or(0);
    Ok(RecursiveParts { locations, rec_calls, rec_transitions, nfc })
}

/// Per-location linear polynomial; absent locations map to 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearRF {
    pub funcs: BTreeMap<Location, Polynomial>,
}

impl LinearRF {
    pub fn at(&self, l: &str) -> Polynomial {
        self.funcs.get(l).cloned().unwrap_or_else(Polynomial::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.funcs.values().all(|p| p.is_zero())
    }
}

impl fmt::Display for LinearRF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.funcs.iter().map(|(l, p)| format!("{l}: {p}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RankingTriple {
    pub rd: LinearRF,
    pub rtf: LinearRF,
    pub rf: LinearRF,
}

impl RankingTriple {
    pub fn component(&self, c: Component) -> &LinearRF {
        match c {
            Component::D => &self.rd,
            Component::TF => &self.rtf,
            Component::F => &self.rf,
        }
    }

    pub fn component_mut(&mut self, c: Component) -> &mut LinearRF {
        match c {
            Component::D => &mut self.rd,
            Component::TF => &mut self.rtf,
            Component::F => &mut self.rf,
        }
    }
}

impl fmt::Display for RankingTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨r_d={}, r_tf={}, r_f={}⟩", self.rd, self.rtf, self.rf)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    D,
    TF,
    F,
}

pub const COMPONENTS: [Component; 3] = [Component::D, Component::TF, Component::F];

impl Component {
    fn tag(self) -> &'static str {
        match self {
            Component::D => "d",
            Component::TF => "tf",
            Component::F => "f",
        }
    }
}

/// One implication `guard ⟹ r(from) - r(to)∘update ≥ delta`, or `guard ⟹ r(from) ≥ delta` without a step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub label: String,
    pub component: Component,
    pub guard: Constraint,
    pub from: Location,
    pub step: Option<(Location, BTreeMap<String, Polynomial>)>,
    pub delta: i64,
}

impl Obligation {
    /// `r(from) - r(to)∘update - delta` for a concrete ranking function.
    pub fn slack(&self, rf: &LinearRF) -> Polynomial {
        let mut e = rf.at(&self.from);
        if let Some((to, upd)) = &self.step {
            let map: BTreeMap<Sym, Polynomial> = upd.iter().map(|(v, p)| (Sym::Var(v.clone()), p.clone())).collect();
            e = &e - &rf.at(to).substitute(&map);
        }
        &e - &Polynomial::int(self.delta)
    }
}

pub fn obligations(prog: &Program, tp: &BTreeSet<usize>, t: usize) -> Result<Vec<Obligation>, RfError> {
    let parts = recursive_parts(prog, tp)?;
    if !tp.contains(&t) {
        return Err(RfError::NotInSubprogram(prog.transitions[t].id.clone()));
    }
    let t_rec = parts.rec_transitions.contains(&t);
    let mut out = Vec::new();
    for &tq in tp {
        let tr = &prog.transitions[tq];
        for c in COMPONENTS {
            let delta = match c {
                Component::D => (tq == t && !t_rec) as i64,
                Component::TF => parts.rec_transitions.contains(&tq) as i64,
                Component::F => 0,
            };
            out.push(Obligation {
                label: format!("{} step", tr.id),
                component: c,
                guard: tr.guard.clone(),
                from: tr.source.clone(),
                step: Some((tr.target.clone(), tr.eta.clone())),
                delta,
            });
            if delta == 1 {
                out.push(Obligation {
                    label: format!("{} positive", tr.id),
                    component: c,
                    guard: tr.guard.clone(),
                    from: tr.source.clone(),
                    step: None,
                    delta: 1,
                });
            }
        }
        for rho in tr.calls().intersection(&parts.rec_calls) {
            let call = prog.call(rho).expect("validated call");
            for c in COMPONENTS {
                out.push(Obligation {
                    label: format!("{rho} in {}", tr.id),
                    component: c,
                    guard: tr.guard.clone(),
                    from: tr.source.clone(),
                    step: Some((call.target.clone(), call.zeta.clone())),
                    delta: (c == Component::F) as i64,
                });
            }
            out.push(Obligation {
                label: format!("{rho} in {} positive", tr.id),
                component: Component::F,
                guard: tr.guard.clone(),
                from: tr.source.clone(),
                step: None,
                delta: 1,
            });
        }
    }
    Ok(out)
}

/// Linear guard atoms as rows `Σ a·s ≤ b`, gcd-tightened; `None` when a constant atom is false.
pub fn guard_rows(guard: &Constraint) -> Option<Vec<(BTreeMap<Sym, BigInt>, BigInt)>> {
    let mut rows = Vec::new();
    for a in &guard.atoms {
        if !a.is_linear() {
            continue;
        }
        // lhs - rhs + 1 ≤ 0
        let e = &(&a.lhs - &a.rhs) + &Polynomial::int(1);
        let mut coeffs = BTreeMap::new();
        for (m, c) in e.terms() {
            if let Some((s, _)) = m.iter().next() {
                coeffs.insert(s.clone(), c.clone());
            }
        }
        let b = -e.constant_term();
        if coeffs.is_empty() {
            if b.is_negative() {
                return None;
            }
            continue;
        }
        let g = coeffs.values().fold(BigInt::zero(), |g, c| g.gcd(c));
        let coeffs = coeffs.into_iter().map(|(s, c)| (s, c / &g)).collect();
        rows.push((coeffs, b.div_floor(&g)));
    }
    Some(rows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// Guard has no integer solution.
    Vacuous,
    /// Nonnegative multipliers for the guard rows.
    Farkas(Vec<Q>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub subprogram: BTreeSet<usize>,
    pub transition: usize,
    pub obligations: Vec<(Obligation, Witness)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Synthesized {
    pub triple: RankingTriple,
    pub certificate: Certificate,
}

fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

struct Template {
    /// (component, location index, None = constant | Some(variable index)) → unknown name.
    names: BTreeMap<(Component, usize, Option<usize>), String>,
    locs: Vec<Location>,
}

impl Template {
    fn unknown(&self, c: Component, loc: &str, v: Option<usize>) -> Option<QPoly> {
        let li = self.locs.iter().position(|l| l == loc)?;
        Some(QPoly::var(&self.names[&(c, li, v)]))
    }
}

fn is_sat_guard(guard: &Constraint, cfg: &SmtConfig) -> Result<bool, SmtError> {
    Ok(!matches!(smt::satisfiable(guard, cfg)?, Answer::Unsat))
}

/// Synthesizes a function-call ranking triple measuring `t` within `tp`.
pub fn synthesize_rho_rf(prog: &Program, tp: &BTreeSet<usize>, t: usize, cfg: &SmtConfig) -> Result<Option<Synthesized>, RfError> {
    let parts = recursive_parts(prog, tp)?;
    let obls = obligations(prog, tp, t)?;
    let t_rec = parts.rec_transitions.contains(&t);
    let locs: Vec<Location> = parts.locations.iter().cloned().collect();
    let mut names = BTreeMap::new();
    for c in COMPONENTS {
        for li in 0..locs.len() {
            names.insert((c, li, None), format!("u_{}_{li}_c", c.tag()));
            for vi in 0..prog.variables.len() {
                names.insert((c, li, Some(vi)), format!("u_{}_{li}_{vi}", c.tag()));
            }
        }
    }
    let tmpl = Template { names, locs };
    let mut q = Query::new();
    for n in tmpl.names.values() {
        q.declare(n, Sort::Real);
    }
    if t_rec {
        for ((c, _, _), n) in &tmpl.names {
            if *c == Component::D {
                q.assert(QPoly::var(n), Cmp::Eq, QPoly::zero());
            }
        }
    }
    // which obligations get multipliers (None = vacuous)
    let mut lambda_names: Vec<Option<Vec<String>>> = Vec::new();
    let mut sat_cache: BTreeMap<Constraint, bool> = BTreeMap::new();
    for (oi, ob) in obls.iter().enumerate() {
        let feasible = match sat_cache.get(&ob.guard) {
            Some(b) => *b,
            None => {
                let b = is_sat_guard(&ob.guard, cfg)?;
                sat_cache.insert(ob.guard.clone(), b);
                b
            }
        };
        let rows = if feasible { guard_rows(&ob.guard) } else { None };
        let Some(rows) = rows else {
            lambda_names.push(None);
            continue;
        };
        // slack(x) = Σ_s coef_s(u)·s + coef_0(u) - delta
        let mut coef: BTreeMap<Sym, QPoly> = BTreeMap::new();
        let mut coef0 = tmpl.unknown(ob.component, &ob.from, None).unwrap_or_else(QPoly::zero);
        for (vi, v) in prog.variables.iter().enumerate() {
            if let Some(u) = tmpl.unknown(ob.component, &ob.from, Some(vi)) {
                let e = coef.entry(Sym::Var(v.clone())).or_insert_with(QPoly::zero);
                *e = &*e + &u;
            }
        }
        if let Some((to, upd)) = &ob.step {
            if let Some(u0) = tmpl.unknown(ob.component, to, None) {
                coef0 = &coef0 - &u0;
            }
            for (vi, w) in prog.variables.iter().enumerate() {
                let Some(u) = tmpl.unknown(ob.component, to, Some(vi)) else { continue };
                let p = &upd[w];
                if !p.is_linear() {
                    q.assert(u, Cmp::Eq, QPoly::zero());
                    continue;
                }
                for (m, c) in p.terms() {
                    let term = u.scale(&Q::from_integer(c.clone()));
                    match m.iter().next() {
                        None => coef0 = &coef0 - &term,
                        Some((s, _)) => {
                            let e = coef.entry(s.clone()).or_insert_with(QPoly::zero);
                            *e = &*e - &term;
                        }
                    }
                }
            }
        }
        let lam: Vec<String> = (0..rows.len()).map(|k| format!("lam_{oi}_{k}")).collect();
        for l in &lam {
            q.declare(l, Sort::Real);
            q.assert(QPoly::var(l), Cmp::Ge, QPoly::zero());
        }
        let mut syms: BTreeSet<Sym> = coef.keys().cloned().collect();
        for (r, _) in &rows {
            syms.extend(r.keys().cloned());
        }
        for s in syms {
            // Σ λ_k·A_{k,s} + coef_s(u) = 0
            let mut lhs = coef.get(&s).cloned().unwrap_or_else(QPoly::zero);
            for (k, (r, _)) in rows.iter().enumerate() {
                if let Some(a) = r.get(&s) {
                    lhs = &lhs + &QPoly::var(&lam[k]).scale(&Q::from_integer(a.clone()));
                }
            }
            q.assert(lhs, Cmp::Eq, QPoly::zero());
        }
        // Σ λ_k·b_k ≤ coef_0(u) - delta
        let mut lb = QPoly::zero();
        for (k, (_, b)) in rows.iter().enumerate() {
            lb = &lb + &QPoly::var(&lam[k]).scale(&Q::from_integer(b.clone()));
        }
        q.assert(lb, Cmp::Le, &coef0 - &QPoly::constant(qi(ob.delta)));
        lambda_names.push(Some(lam));
    }
    // |u| helpers for the objectives
    let mut obj_vars = QPoly::zero();
    let mut obj_consts = QPoly::zero();
    for ((_, _, v), n) in &tmpl.names {
        let a = format!("abs_{n}");
        q.declare(&a, Sort::Real);
        q.assert(QPoly::var(&a), Cmp::Ge, QPoly::var(n));
        q.assert(QPoly::var(&a), Cmp::Ge, -QPoly::var(n));
        if v.is_some() {
            obj_vars = &obj_vars + &QPoly::var(&a);
        } else {
            obj_consts = &obj_consts + &QPoly::var(&a);
        }
    }
    q.minimize = vec![obj_vars, obj_consts];
    let model = match smt::solve(&q, cfg)? {
        Answer::Sat(m) => m,
        _ => return Ok(None),
    };
    let val = |n: &str| model.get(n).cloned().unwrap_or_else(Q::zero);
    // scale each component to integer coefficients
    let mut triple = RankingTriple::default();
    let mut scale: BTreeMap<Component, Q> = BTreeMap::new();
    for c in COMPONENTS {
        let mut l = BigInt::one();
        for ((cc, _, _), n) in &tmpl.names {
            if *cc == c {
                l = l.lcm(val(n).denom());
            }
        }
        let k = Q::from_integer(l);
        for (li, loc) in tmpl.locs.iter().enumerate() {
            let mut p = QPoly::constant(val(&tmpl.names[&(c, li, None)]) * &k);
            for (vi, v) in prog.variables.iter().enumerate() {
                p = &p + &QPoly::var(v).scale(&(val(&tmpl.names[&(c, li, Some(vi))]) * &k));
            }
            triple.component_mut(c).funcs.insert(loc.clone(), p.to_integer().expect("scaled to integers"));
        }
        scale.insert(c, k);
    }
    let mut cert = Vec::new();
    for (ob, lam) in obls.into_iter().zip(lambda_names) {
        let w = match lam {
            None => Witness::Vacuous,
            Some(ls) => Witness::Farkas(ls.iter().map(|l| val(l) * &scale[&ob.component]).collect()),
        };
        cert.push((ob, w));
    }
    Ok(Some(Synthesized { triple, certificate: Certificate { subprogram: tp.clone(), transition: t, obligations: cert } }))
}

/// Classical ranking function for `t` within `tp`; requires a subprogram without recursive calls.
pub fn synthesize_rf(prog: &Program, tp: &BTreeSet<usize>, t: usize, cfg: &SmtConfig) -> Result<Option<(LinearRF, Certificate)>, RfError> {
    if !recursive_parts(prog, tp)?.rec_calls.is_empty() {
        return Err(RfError::HasRecursiveCalls);
    }
    Ok(synthesize_rho_rf(prog, tp, t, cfg)?.map(|s| (s.triple.rd, s.certificate)))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("certificate lists {found} obligations, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("obligation `{0}` differs from the regenerated one")]
    Mismatch(String),
    #[error("multipliers do not certify `{0}`")]
    Farkas(String),
    #[error("guard of `{0}` is satisfiable")]
    NotVacuous(String),
    #[error("independent entailment check failed for `{0}`")]
    Entailment(String),
    #[error(transparent)]
    Rf(#[from] RfError),
}

/// Exact Farkas check: `λ ≥ 0`, `λᵀA = -lin(slack)`, `λᵀb ≤ const(slack)`.
pub fn check_farkas(guard: &Constraint, slack: &Polynomial, lambda: &[Q]) -> bool {
    let Some(rows) = guard_rows(guard) else { return true };
    if rows.len() != lambda.len() || lambda.iter().any(|l| l.is_negative()) || !slack.is_linear() {
        return false;
    }
    let mut syms: BTreeSet<Sym> = slack.syms();
    for (r, _) in &rows {
        syms.extend(r.keys().cloned());
    }
    for s in syms {
        let mut acc = Q::from_integer(slack.linear_coeff(&s));
        for (l, (r, _)) in lambda.iter().zip(&rows) {
            if let Some(a) = r.get(&s) {
                acc += l * Q::from_integer(a.clone());
            }
        }
        if !acc.is_zero() {
            return false;
        }
    }
    let lb: Q = lambda.iter().zip(&rows).map(|(l, (_, b))| l * Q::from_integer(b.clone())).sum();
    lb <= Q::from_integer(slack.constant_term())
}

/// Re-verifies a triple: regenerates all obligations, replays the multipliers exactly and re-checks each implication with `entails`.
pub fn replay(prog: &Program, triple: &RankingTriple, cert: &Certificate, cfg: &SmtConfig) -> Result<(), ReplayError> {
    let obls = obligations(prog, &cert.subprogram, cert.transition)?;
    if obls.len() != cert.obligations.len() {
        return Err(ReplayError::Shape { expected: obls.len(), found: cert.obligations.len() });
    }
    let parts = recursive_parts(prog, &cert.subprogram)?;
    if parts.rec_transitions.contains(&cert.transition) && !triple.rd.is_zero() {
        return Err(ReplayError::Mismatch("r_d must vanish for a recursive transition".into()));
    }
    for (ob, (cob, w)) in obls.iter().zip(&cert.obligations) {
        if ob != cob {
            return Err(ReplayError::Mismatch(ob.label.clone()));
        }
        let name = format!("{} [r_{}]", ob.label, ob.component.tag());
        let slack = ob.slack(triple.component(ob.component));
        match w {
            Witness::Vacuous => {
                if smt::satisfiable(&ob.guard, cfg).map_err(RfError::from)? != Answer::Unsat {
                    return Err(ReplayError::NotVacuous(name));
                }
                continue;
            }
            Witness::Farkas(l) => {
                if !check_farkas(&ob.guard, &slack, l) {
                    return Err(ReplayError::Farkas(name));
                }
            }
        }
        let goal = Atom::le(Polynomial::zero(), slack);
        if smt::entails(&ob.guard, &goal, cfg).map_err(RfError::from)? != Entailment::Yes {
            return Err(ReplayError::Entailment(name));
        }
    }
    Ok(())
}

/// `⌈r(ℓ)⌉`.
pub fn local_bound_from_rf(rf: &LinearRF, l: &str) -> Bound {
    ceil_poly(&rf.at(l))
}

/// `⌈r_d⌉ + ⌈r_f⌉·(1 + (1+nfc)·⌈r_d⌉)·(nfc·⌈r_tf⌉)^⌈r_f⌉` at `l`.
pub fn local_bound_from_rho_rf(triple: &RankingTriple, l: &str, nfc: usize) -> Bound {
    let rd = ceil_poly(&triple.rd.at(l));
    let rtf = ceil_poly(&triple.rtf.at(l));
    let rf = ceil_poly(&triple.rf.at(l));
    let n = nfc as u64;
    let inner = Bound::sum([Bound::one(), Bound::prod([Bound::nat(1 + n), rd.clone()])]);
    let pow = Bound::pow(Bound::prod([Bound::nat(n), rtf]), rf.clone());
    Bound::sum([rd, Bound::prod([rf, inner, pow])]).simplify()
}

/// Exact value of the recursion-tree recurrence `R_{n0}(n1, n2)`.
pub fn recurrence_oracle(n0: u64, n1: u64, n2: u64, nfc: u64) -> BigInt {
    let (w, h) = (n1 as usize + 1, n2 as usize + 1);
    let mut r = vec![BigInt::zero(); w * h];
    for a in 0..w {
        for b in 0..h {
            r[a * h + b] = if a == 0 || b == 0 || nfc == 0 {
                BigInt::from(n0)
            } else {
                BigInt::from(1 + n0) + &r[(a - 1) * h + b] + BigInt::from(nfc) * &r[a * h + b - 1]
            };
        }
    }
    r[w * h - 1].clone()
}

/// Local bound 1 for non-recursive transitions when every frame can take at most one step of `tp` and calls do not branch.
pub fn chain_local_bound(prog: &Program, tp: &BTreeSet<usize>, t: usize) -> Result<Option<Bound>, RfError> {
    let parts = recursive_parts(prog, tp)?;
    if !tp.contains(&t) {
        return Err(RfError::NotInSubprogram(prog.transitions[t].id.clone()));
    }
    if parts.nfc > 1 || parts.rec_transitions.contains(&t) {
        return Ok(None);
    }
    let dead_ends = tp.iter().all(|&tq| !parts.locations.contains(&prog.transitions[tq].target));
    Ok(if dead_ends { Some(Bound::one()) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_values() {
        assert_eq!(recurrence_oracle(5, 0, 3, 1), BigInt::from(5));
        assert_eq!(recurrence_oracle(0, 1, 1, 1), BigInt::from(1));
        assert_eq!(recurrence_oracle(1, 2, 1, 1), BigInt::from(7));
    }

    #[test]
    fn closed_form_dominates() {
        let mut t = RankingTriple::default();
        t.rd.funcs.insert("l".into(), Polynomial::int(2));
        t.rtf.funcs.insert("l".into(), Polynomial::int(3));
        t.rf.funcs.insert("l".into(), Polynomial::int(2));
        assert_eq!(local_bound_from_rho_rf(&t, "l", 2), Bound::nat(506));
        assert!(recurrence_oracle(2, 3, 2, 2) <= BigInt::from(506));
    }
}
