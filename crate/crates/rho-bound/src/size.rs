//! Size bounds: local size bounds, the result variable graph and SCC lifting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::bounds::{call_var, ceil_poly, Bound};
use crate::its::{Atom, Constraint, Location, Program};
use crate::poly::{Monomial, Polynomial, Sym};
use crate::smt::{self, Entailment, SmtConfig, SmtError};

/// A transition (by index) or a function call (by index into `Program::calls`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Theta {
    Trans(usize),
    Call(usize),
}

/// Result variable `(ϑ, v)`.
pub type Rv = (Theta, String);

pub fn theta_name(prog: &Program, th: &Theta) -> String {
    match th {
        Theta::Trans(i) => prog.transitions[*i].id.clone(),
        Theta::Call(i) => prog.calls[*i].id.clone(),
    }
}

pub fn rv_name(prog: &Program, rv: &Rv) -> String {
    format!("{},{}", theta_name(prog, &rv.0), rv.1)
}

/// Guards under which `ϑ` fires; a call inherits the guards of the transitions containing it.
fn contexts(prog: &Program, th: &Theta) -> Vec<Constraint> {
    match th {
        Theta::Trans(i) => vec![prog.transitions[*i].guard.clone()],
        Theta::Call(i) => prog.trans_of(&prog.calls[*i].id).into_iter().map(|t| prog.transitions[t].guard.clone()).collect(),
    }
}

fn update_of(prog: &Program, th: &Theta, v: &str) -> Polynomial {
    match th {
        Theta::Trans(i) => prog.transitions[*i].eta[v].clone(),
        Theta::Call(i) => prog.calls[*i].zeta[v].clone(),
    }
}

fn abs_name(s: &Sym) -> String {
    format!("w__{}", s.name())
}

/// `ctx ⟹ |p| ≤ q(|w|)` for every `w` with `w ≥ |sym|`.
fn certifies(ctx: &Constraint, p: &Polynomial, q: &Polynomial, cfg: &SmtConfig) -> Result<bool, SmtError> {
    if !p.is_linear() || !q.is_linear() {
        return Ok(false);
    }
    let mut phi = ctx.clone();
    let mut ren = BTreeMap::new();
    for s in q.syms().into_iter().chain(p.syms()) {
        let w = Polynomial::var(&abs_name(&s));
        let x = Polynomial::sym(s.clone());
        phi.atoms.push(Atom::le(x.clone(), w.clone()));
        phi.atoms.push(Atom::le(-&x, w.clone()));
        ren.insert(s, w);
    }
    let qw = q.substitute(&ren);
    for lhs in [p.clone(), -p] {
        if smt::entails(&phi, &Atom::le(lhs, qw.clone()), cfg)? != Entailment::Yes {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `SBloc(ϑ, v)`: `⌈η(v)⌉` (or `⌈ζ(v)⌉`), tightened under the guard by dropping the
/// constant and negative linear terms where this is certified.
pub fn local_size_bound(prog: &Program, th: &Theta, v: &str, cfg: &SmtConfig) -> Result<Polynomial, SmtError> {
    let p = update_of(prog, th, v);
    let base = p.abs_coeffs();
    if !p.is_linear() {
        return Ok(base);
    }
    let droppable: Vec<Monomial> = p
        .terms()
        .filter(|(m, c)| m.is_empty() || c.is_negative())
        .map(|(m, _)| m.clone())
        .collect();
    if droppable.is_empty() {
        return Ok(base);
    }
    let ctxs = contexts(prog, th);
    // most terms dropped first
    let mut masks: Vec<u32> = (1..(1u32 << droppable.len())).collect();
    masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
    for mask in masks {
        let mut q = base.clone();
        for (i, m) in droppable.iter().enumerate() {
            if mask & (1 << i) != 0 {
                q.add_term(m.clone(), -base.coeff(m));
            }
        }
        let mut ok = true;
        for ctx in &ctxs {
            if !certifies(ctx, &p, &q, cfg)? {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(q);
        }
    }
    Ok(base)
}

pub fn all_thetas(prog: &Program) -> Vec<Theta> {
    (0..prog.transitions.len()).map(Theta::Trans).chain((0..prog.calls.len()).map(Theta::Call)).collect()
}

pub type LocalSizes = BTreeMap<Rv, Polynomial>;

pub fn local_size_bounds(prog: &Program, cfg: &SmtConfig) -> Result<LocalSizes, SmtError> {
    let mut out = BTreeMap::new();
    for th in all_thetas(prog) {
        for v in &prog.variables {
            out.insert((th.clone(), v.clone()), local_size_bound(prog, &th, v, cfg)?);
        }
    }
    Ok(out)
}

/// Transitions and calls that may directly precede `ϑ`.
pub fn pre(prog: &Program, th: &Theta) -> BTreeSet<Theta> {
    match th {
        Theta::Trans(i) => {
            let l = &prog.transitions[*i].source;
            let ts = (0..prog.transitions.len()).filter(|&j| &prog.transitions[j].target == l).map(Theta::Trans);
            let cs = (0..prog.calls.len()).filter(|&k| &prog.calls[k].target == l).map(Theta::Call);
            ts.chain(cs).collect()
        }
        Theta::Call(k) => prog.trans_of(&prog.calls[*k].id).into_iter().flat_map(|t| pre(prog, &Theta::Trans(t))).collect(),
    }
}

fn reachable(prog: &Program, from: &Location) -> BTreeSet<Location> {
    let mut seen = BTreeSet::from([from.clone()]);
    let mut todo = vec![from.clone()];
    while let Some(l) = todo.pop() {
        for t in &prog.transitions {
            if t.source == l && seen.insert(t.target.clone()) {
                todo.push(t.target.clone());
            }
        }
    }
    seen
}

/// Ω-predecessors of a call: the steps that can end its frame, with the returned variable.
/// A call whose target is itself a return location returns its own argument.
pub fn pre_omega_call(prog: &Program, call: &str) -> BTreeSet<Rv> {
    let Some(k) = prog.call_index(call) else { return BTreeSet::new() };
    let target = &prog.calls[k].target;
    let reach = reachable(prog, target);
    let mut out = BTreeSet::new();
    if let Some(v) = prog.returns.get(target) {
        out.insert((Theta::Call(k), v.clone()));
    }
    for (i, t) in prog.transitions.iter().enumerate() {
        if reach.contains(&t.source) {
            if let Some(v) = prog.returns.get(&t.target) {
                out.insert((Theta::Trans(i), v.clone()));
            }
        }
    }
    out
}

/// `preΩ(t, ρ)`; empty when `ρ` does not occur in `t`.
pub fn pre_omega(prog: &Program, t: usize, call: &str) -> BTreeSet<Rv> {
    if !prog.transitions[t].calls().contains(call) {
        return BTreeSet::new();
    }
    pre_omega_call(prog, call)
}

/// The unique variable returned by `call`, if it is unique.
pub fn return_var(prog: &Program, call: &str) -> Option<String> {
    let vs: BTreeSet<String> = pre_omega_call(prog, call).into_iter().map(|(_, v)| v).collect();
    if vs.len() == 1 {
        vs.into_iter().next()
    } else {
        None
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Rvg {
    pub nodes: Vec<Rv>,
    pub rv_edges: BTreeSet<(Rv, Rv)>,
    pub omega_edges: BTreeSet<(Rv, Rv)>,
}

pub fn build_rvg(prog: &Program, sloc: &LocalSizes) -> Rvg {
    let mut g = Rvg::default();
    for th in all_thetas(prog) {
        let preds = pre(prog, &th);
        for v in &prog.variables {
            let alpha = (th.clone(), v.clone());
            g.nodes.push(alpha.clone());
            let p = &sloc[&alpha];
            for pv in p.vars() {
                for tp in &preds {
                    g.rv_edges.insert(((tp.clone(), pv.clone()), alpha.clone()));
                }
            }
            if let Theta::Trans(t) = th {
                for c in p.calls() {
                    for beta in pre_omega(prog, t, &c) {
                        g.omega_edges.insert((beta, alpha.clone()));
                    }
                }
            }
        }
    }
    g
}

impl Rvg {
    /// Strongly connected components in topological order.
    pub fn sccs(&self) -> Vec<Vec<Rv>> {
        let mut gr: DiGraph<Rv, ()> = DiGraph::new();
        let idx: BTreeMap<&Rv, _> = self.nodes.iter().map(|n| (n, gr.add_node(n.clone()))).collect();
        for (a, b) in self.rv_edges.iter().chain(&self.omega_edges) {
            gr.add_edge(idx[a], idx[b], ());
        }
        let mut out: Vec<Vec<Rv>> = tarjan_scc(&gr)
            .into_iter()
            .rev()
            .map(|c| {
                let mut c: Vec<Rv> = c.into_iter().map(|n| gr[n].clone()).collect();
                c.sort();
                c
            })
            .collect();
        out.dedup();
        out
    }

    pub fn is_trivial(&self, scc: &[Rv]) -> bool {
        scc.len() == 1 && !self.has_edge(&scc[0], &scc[0])
    }

    fn has_edge(&self, a: &Rv, b: &Rv) -> bool {
        let e = (a.clone(), b.clone());
        self.rv_edges.contains(&e) || self.omega_edges.contains(&e)
    }

    /// RV-edges solid, Ω-edges dashed.
    pub fn to_dot(&self, prog: &Program) -> String {
        let mut s = String::from("digraph rvg {\n");
        for n in &self.nodes {
            let _ = writeln!(s, "  \"{}\";", rv_name(prog, n));
        }
        for (a, b) in &self.rv_edges {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", rv_name(prog, a), rv_name(prog, b));
        }
        for (a, b) in &self.omega_edges {
            let _ = writeln!(s, "  \"{}\" -> \"{}\" [style=dashed];", rv_name(prog, a), rv_name(prog, b));
        }
        s.push_str("}\n");
        s
    }
}

/// `SBloc ≤ scale·(add + Σ residual)` pointwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub scale: Polynomial,
    pub add: BigInt,
    pub residual: BTreeSet<Sym>,
}

fn dominates(big: &Polynomial, small: &Polynomial) -> bool {
    // both have nonnegative coefficients
    small.terms().all(|(m, c)| &big.coeff(m) >= c)
}

fn check_decomposition(p: &Polynomial, d: &Decomposition) -> bool {
    let mut inner = Polynomial::constant(d.add.clone());
    for s in &d.residual {
        inner = &inner + &Polynomial::sym(s.clone());
    }
    dominates(&(&d.scale * &inner), p)
}

pub fn decompose_sloc(p: &Polynomial) -> Option<Decomposition> {
    if !p.has_nonnegative_coeffs() {
        return None;
    }
    if p.is_linear() {
        let c0 = p.constant_term();
        let residual: BTreeSet<Sym> = p.syms();
        let s = residual.iter().map(|x| p.linear_coeff(x)).max().unwrap_or_else(BigInt::one).max(BigInt::one());
        let d = Decomposition { add: c0.div_ceil(&s), scale: Polynomial::constant(s), residual };
        return check_decomposition(p, &d).then_some(d);
    }
    // common monomial factor over variables, with the integer content
    let mut common: Option<Monomial> = None;
    let mut content = BigInt::zero();
    for (m, c) in p.terms() {
        content = content.gcd(c);
        let vars: Monomial = m.iter().filter(|(s, _)| matches!(s, Sym::Var(_))).map(|(s, e)| (s.clone(), *e)).collect();
        common = Some(match common {
            None => vars,
            Some(cm) => cm
                .iter()
                .filter_map(|(s, e)| vars.get(s).map(|e2| (s.clone(), (*e).min(*e2))))
                .collect(),
        });
    }
    let common = common?;
    if common.is_empty() || content.is_zero() {
        return None;
    }
    let mut rest = Polynomial::zero();
    for (m, c) in p.terms() {
        let mut m2 = m.clone();
        for (s, e) in &common {
            let left = m2[s] - e;
            if left == 0 {
                m2.remove(s);
            } else {
                m2.insert(s.clone(), left);
            }
        }
        rest.add_term(m2, c / &content);
    }
    if !rest.is_linear() || rest.terms().any(|(m, c)| !m.is_empty() && !c.is_one()) {
        return None;
    }
    let scale = Polynomial::from_terms([(common, content)]);
    let d = Decomposition { add: rest.constant_term(), residual: rest.syms(), scale };
    check_decomposition(p, &d).then_some(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SizeRule {
    Trivial,
    TrivialCall,
    Additive,
    Scaled,
    Unknown,
}

/// Per-path bound on the occurrences of a transition: its local runtime bound
/// instantiated at the entries of the subprogram it was found for.
#[derive(Clone, Debug, PartialEq)]
pub struct Depth {
    pub bound: Bound,
    pub subprogram: BTreeSet<usize>,
}

pub type SizeBounds = BTreeMap<Rv, Bound>;

pub struct SizeContext<'a> {
    pub prog: &'a Program,
    pub sloc: &'a LocalSizes,
    pub rvg: &'a Rvg,
    pub rb: &'a BTreeMap<usize, Bound>,
    pub depth: &'a BTreeMap<usize, Depth>,
    /// Use per-path depths as scale exponents where sound.
    pub refine_scale: bool,
}

fn lookup(sb: &SizeBounds, rv: &Rv) -> Bound {
    sb.get(rv).cloned().unwrap_or_else(Bound::omega)
}

fn var_subst(ctx: &SizeContext, sb: &SizeBounds, th: &Theta) -> BTreeMap<String, Bound> {
    ctx.prog.variables.iter().map(|v| (v.clone(), lookup(sb, &(th.clone(), v.clone())))).collect()
}

fn max_or_omega(xs: Vec<Bound>) -> Bound {
    if xs.is_empty() {
        Bound::omega()
    } else {
        Bound::max(xs)
    }
}

/// Entries into a non-trivial SCC: values without an outside predecessor were counted where they entered.
fn max_or_zero(xs: Vec<Bound>) -> Bound {
    if xs.is_empty() {
        Bound::zero()
    } else {
        Bound::max(xs)
    }
}

/// `SBloc` instantiated at every predecessor.
pub fn size_trivial(ctx: &SizeContext, sb: &SizeBounds, alpha: &Rv) -> Bound {
    let local = ceil_poly(&ctx.sloc[alpha]);
    let preds = pre(ctx.prog, &alpha.0);
    if preds.is_empty() {
        return local;
    }
    Bound::max(preds.iter().map(|p| local.subst(&var_subst(ctx, sb, p))))
}

/// Size of the value returned by `call`, maximized over its Ω-predecessors.
fn call_result(ctx: &SizeContext, sb: &SizeBounds, call: &str, exclude: &[Rv]) -> Option<Bound> {
    return_var(ctx.prog, call)?;
    let preds: Vec<Bound> = pre_omega_call(ctx.prog, call).into_iter().filter(|b| !exclude.contains(b)).map(|b| lookup(sb, &b)).collect();
    Some(max_or_omega(preds))
}

/// Variables are substituted first, then call results.
pub fn size_trivial_call(ctx: &SizeContext, sb: &SizeBounds, alpha: &Rv) -> Bound {
    let Theta::Trans(t) = alpha.0 else { return size_trivial(ctx, sb, alpha) };
    let local = ceil_poly(&ctx.sloc[alpha]);
    let mut calls = BTreeMap::new();
    for c in ctx.sloc[alpha].calls() {
        if pre_omega(ctx.prog, t, &c).is_empty() {
            return Bound::zero();
        }
        match call_result(ctx, sb, &c, &[]) {
            Some(b) => calls.insert(call_var(&c), b),
            None => return Bound::omega(),
        };
    }
    let preds = pre(ctx.prog, &alpha.0);
    let with_vars: Vec<Bound> = if preds.is_empty() {
        vec![local]
    } else {
        preds.iter().map(|p| local.subst(&var_subst(ctx, sb, p))).collect()
    };
    Bound::max(with_vars.into_iter().map(|b| b.subst(&calls)))
}

fn rb_of(ctx: &SizeContext, th: &Theta) -> Bound {
    let rb = |t: usize| ctx.rb.get(&t).cloned().unwrap_or_else(Bound::omega);
    match th {
        Theta::Trans(t) => rb(*t),
        Theta::Call(k) => Bound::sum(ctx.prog.trans_of(&ctx.prog.calls[*k].id).into_iter().map(rb)),
    }
}

/// Exponent of `scale(α)`: the global runtime bound, or the per-path depth when
/// every member of `C` belongs to the subprogram the depth was derived for.
fn scale_exponent(ctx: &SizeContext, scc: &[Rv], th: &Theta) -> Bound {
    let global = rb_of(ctx, th);
    if !ctx.refine_scale {
        return global;
    }
    let Theta::Trans(t) = th else { return global };
    let Some(d) = ctx.depth.get(t) else { return global };
    let inside = scc.iter().all(|(th2, _)| match th2 {
        Theta::Trans(i) => d.subprogram.contains(i),
        Theta::Call(k) => ctx.prog.trans_of(&ctx.prog.calls[*k].id).is_subset(&d.subprogram),
    });
    if inside {
        d.bound.clone()
    } else {
        global
    }
}

/// Bound for a non-trivial SCC; the rule is `Additive` when every scale is 1.
pub fn size_nontrivial(ctx: &SizeContext, sb: &SizeBounds, scc: &[Rv]) -> (Bound, SizeRule) {
    let in_c = |rv: &Rv| scc.contains(rv);
    let mut scales = Vec::new();
    let mut sums = Vec::new();
    let mut additive = true;
    for alpha in scc {
        let sloc = &ctx.sloc[alpha];
        let Some(dec) = decompose_sloc(sloc) else { return (Bound::omega(), SizeRule::Unknown) };
        let th = &alpha.0;
        let preds = pre(ctx.prog, th);
        let v_alpha: BTreeSet<String> = ctx
            .rvg
            .rv_edges
            .iter()
            .filter(|(a, b)| b == alpha && in_c(a))
            .map(|(a, _)| a.1.clone())
            .collect();
        let f_alpha: BTreeSet<String> = ctx
            .rvg
            .omega_edges
            .iter()
            .filter(|(a, b)| b == alpha && in_c(a))
            .map(|(a, _)| a.1.clone())
            .collect();
        let init = |v: &str| {
            let xs: Vec<Bound> = preds
                .iter()
                .map(|p| (p.clone(), v.to_string()))
                .filter(|rv| !in_c(rv))
                .map(|rv| lookup(sb, &rv))
                .collect();
            max_or_zero(xs)
        };
        let mut omega_preds: BTreeSet<Rv> = BTreeSet::new();
        let mut ret_vars: BTreeMap<String, String> = BTreeMap::new();
        if let Theta::Trans(t) = th {
            for c in sloc.calls() {
                omega_preds.extend(pre_omega(ctx.prog, *t, &c));
                match return_var(ctx.prog, &c) {
                    Some(v) => ret_vars.insert(c, v),
                    None => return (Bound::omega(), SizeRule::Unknown),
                };
            }
        }
        let init_omega = |v: &str| {
            let xs: Vec<Bound> = omega_preds.iter().filter(|b| b.1 == v && !in_c(b)).map(|b| lookup(sb, b)).collect();
            max_or_zero(xs)
        };
        let scale_vars = dec.scale.vars();
        let mut add_parts = vec![Bound::big(dec.add.magnitude().clone())];
        for v in sloc.vars() {
            if !v_alpha.contains(&v) && !scale_vars.contains(&v) {
                add_parts.push(init(&v));
            }
        }
        let mut fed = 0usize;
        for v in ret_vars.values() {
            if f_alpha.contains(v) {
                fed += 1;
            } else {
                add_parts.push(init_omega(v));
            }
        }
        let add = Bound::prod([rb_of(ctx, th), Bound::sum(add_parts)]);
        let k = (v_alpha.len() + fed).max(1);
        let s_hat = Bound::max(
            std::iter::once(Bound::one()).chain(preds.iter().map(|p| ceil_poly(&dec.scale).subst(&var_subst(ctx, sb, p)))),
        );
        if !(dec.scale.as_constant() == Some(BigInt::one()) && k == 1) {
            additive = false;
        }
        let base = Bound::prod([s_hat, Bound::nat(k as u64)]);
        scales.push(Bound::pow(base, scale_exponent(ctx, scc, th)));
        let mut s = vec![add];
        s.extend(v_alpha.iter().map(|v| init(v)));
        s.extend(f_alpha.iter().map(|v| init_omega(v)));
        sums.push(Bound::sum(s));
    }
    let bound = Bound::prod(scales.into_iter().chain([Bound::sum(sums)]));
    (bound, if additive { SizeRule::Additive } else { SizeRule::Scaled })
}

/// All size bounds in RVG topological order.
pub fn size_bounds(ctx: &SizeContext) -> (SizeBounds, BTreeMap<Rv, SizeRule>) {
    let mut sb = SizeBounds::new();
    let mut rules = BTreeMap::new();
    for scc in ctx.rvg.sccs() {
        if ctx.rvg.is_trivial(&scc) {
            let alpha = &scc[0];
            let (b, r) = if matches!(alpha.0, Theta::Trans(_)) && ctx.sloc[alpha].has_calls() {
                (size_trivial_call(ctx, &sb, alpha), SizeRule::TrivialCall)
            } else {
                (size_trivial(ctx, &sb, alpha), SizeRule::Trivial)
            };
            sb.insert(alpha.clone(), b.simplify());
            rules.insert(alpha.clone(), r);
        } else {
            let (b, r) = size_nontrivial(ctx, &sb, &scc);
            let b = b.simplify();
            for alpha in &scc {
                sb.insert(alpha.clone(), b.clone());
                rules.insert(alpha.clone(), r);
            }
        }
    }
    (sb, rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        let prog = crate::parser::parse(&format!(
            "(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR a x y) (RULES l0(a,x,y) -> l1({s}, x, y))"
        ))
        .unwrap();
        prog.transitions[0].eta["a"].clone()
    }

    #[test]
    fn decompositions() {
        let d = decompose_sloc(&p("2*x")).unwrap();
        assert_eq!((d.scale.to_string(), d.add.to_string()), ("2".to_string(), "0".to_string()));
        let d = decompose_sloc(&p("y + 3")).unwrap();
        assert_eq!((d.scale.to_string(), d.add.to_string()), ("1".to_string(), "3".to_string()));
        let d = decompose_sloc(&p("3*x + 2*y + 5")).unwrap();
        assert_eq!((d.scale.to_string(), d.add.to_string()), ("3".to_string(), "2".to_string()));
        let d = decompose_sloc(&p("x*y + x")).unwrap();
        assert_eq!(d.scale.to_string(), "x");
        assert_eq!(d.add.to_string(), "1");
        assert!(decompose_sloc(&p("x*x + y")).is_none());
    }
}
