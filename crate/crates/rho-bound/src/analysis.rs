//! The alternating runtime/size bound driver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{sample_grid, AsymptoticClass, Bound, NatOmega, Valuation};
use crate::invariants;
use crate::its::{Location, Program};
use crate::rf::{self, RankingTriple, RfError};
use crate::size::{self, Depth, LocalSizes, Rv, Rvg, SizeBounds, SizeContext, SizeRule, Theta};
use crate::smt::{SmtConfig, SmtError};
use crate::twn;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("subprogram contains the initial transition {0}")]
    InitialInSubprogram(String),
    #[error(transparent)]
    Rf(#[from] RfError),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub smt: SmtConfig,
    pub sweeps: usize,
    pub refine_scale: bool,
    pub invariants: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { smt: SmtConfig::from_env(), sweeps: 5, refine_scale: true, invariants: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Technique {
    Initial,
    Twn,
    Rf,
    Chain,
    RhoRf,
    Unbounded,
}

/// A local runtime bound and its lifting.
#[derive(Clone, Debug)]
pub struct LocalRecord {
    pub transition: usize,
    pub subprogram: BTreeSet<usize>,
    pub technique: Technique,
    pub local: BTreeMap<Location, Bound>,
    pub lifted: Bound,
    pub depth: Bound,
    pub triple: Option<rf::Synthesized>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntrySets {
    pub direct: BTreeSet<usize>,
    pub calling: BTreeSet<usize>,
}

/// `ET_{T′}` and `EF_{T′}`.
pub fn entry_sets(prog: &Program, tp: &BTreeSet<usize>) -> Result<EntrySets, AnalysisError> {
    if let Some(&t) = prog.initial_transitions().intersection(tp).next() {
        return Err(AnalysisError::InitialInSubprogram(prog.transitions[t].id.clone()));
    }
    let locs = prog.sources(tp);
    let into = prog.funs_of_locations(&locs);
    let mut es = EntrySets::default();
    for (r, tr) in prog.transitions.iter().enumerate() {
        if tp.contains(&r) {
            continue;
        }
        if locs.contains(&tr.target) {
            es.direct.insert(r);
        }
        if tr.calls().intersection(&into).next().is_some() {
            es.calling.insert(r);
        }
    }
    Ok(es)
}

fn subst_at(prog: &Program, sb: &SizeBounds, th: &Theta, b: &Bound) -> Bound {
    let m: BTreeMap<String, Bound> = prog
        .variables
        .iter()
        .map(|v| (v.clone(), sb.get(&(th.clone(), v.clone())).cloned().unwrap_or_else(Bound::omega)))
        .collect();
    b.subst(&m)
}

/// Each entry point of `T′` with the runtime bound of its entering transition and the
/// local bound instantiated at the entry sizes.
fn entry_instances(
    prog: &Program,
    rb: &BTreeMap<usize, Bound>,
    sb: &SizeBounds,
    tp: &BTreeSet<usize>,
    local: &BTreeMap<Location, Bound>,
) -> Result<Vec<(Bound, Bound)>, AnalysisError> {
    let es = entry_sets(prog, tp)?;
    let locs = prog.sources(tp);
    let into = prog.funs_of_locations(&locs);
    let at = |l: &Location| local.get(l).cloned().unwrap_or_else(Bound::zero);
    let rbo = |r: usize| rb.get(&r).cloned().unwrap_or_else(Bound::omega);
    let mut out = Vec::new();
    for &r in &es.direct {
        let tr = &prog.transitions[r];
        out.push((rbo(r), subst_at(prog, sb, &Theta::Trans(r), &at(&tr.target))));
    }
    for &r in &es.calling {
        for c in prog.transitions[r].calls().intersection(&into) {
            let k = prog.call_index(c).unwrap();
            out.push((rbo(r), subst_at(prog, sb, &Theta::Call(k), &at(&prog.calls[k].target))));
        }
    }
    Ok(out)
}

/// `Σ_r RB(r)·RTloc(ℓ_r)[v/SB(r,v)]` over direct and calling entries.
pub fn lift_runtime(
    prog: &Program,
    rb: &BTreeMap<usize, Bound>,
    sb: &SizeBounds,
    tp: &BTreeSet<usize>,
    local: &BTreeMap<Location, Bound>,
) -> Result<Bound, AnalysisError> {
    let parts = entry_instances(prog, rb, sb, tp, local)?;
    Ok(Bound::sum(parts.into_iter().map(|(r, l)| Bound::prod([r, l]))))
}

/// Largest instantiated local bound over single entries.
fn entry_depth(
    prog: &Program,
    rb: &BTreeMap<usize, Bound>,
    sb: &SizeBounds,
    tp: &BTreeSet<usize>,
    local: &BTreeMap<Location, Bound>,
) -> Result<Bound, AnalysisError> {
    let parts = entry_instances(prog, rb, sb, tp, local)?;
    Ok(if parts.is_empty() { Bound::zero() } else { Bound::max(parts.into_iter().map(|(_, l)| l)) })
}

/// Location SCCs in topological order; edges are transitions and call edges.
pub fn location_sccs(prog: &Program) -> Vec<BTreeSet<Location>> {
    let mut g: DiGraph<Location, ()> = DiGraph::new();
    let idx: BTreeMap<&Location, _> = prog.locations.iter().map(|l| (l, g.add_node(l.clone()))).collect();
    for t in &prog.transitions {
        g.add_edge(idx[&t.source], idx[&t.target], ());
        for c in t.calls() {
            let c = prog.call(&c).unwrap();
            g.add_edge(idx[&t.source], idx[&c.target], ());
        }
    }
    tarjan_scc(&g).into_iter().rev().map(|c| c.into_iter().map(|n| g[n].clone()).collect()).collect()
}

#[derive(Clone, Debug)]
pub struct AnalysisState {
    pub rb: BTreeMap<usize, Bound>,
    pub rb_rule: BTreeMap<usize, Technique>,
    /// Record that produced each finite non-initial runtime bound.
    pub rb_record: BTreeMap<usize, usize>,
    pub sb: SizeBounds,
    pub sb_rule: BTreeMap<Rv, SizeRule>,
    pub depth: BTreeMap<usize, Depth>,
    pub records: Vec<LocalRecord>,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    /// The program with invariant-strengthened guards that was analyzed.
    pub program: Program,
    pub sloc: LocalSizes,
    pub rvg: Rvg,
    pub state: AnalysisState,
    pub overall: Bound,
    pub class: AsymptoticClass,
    pub elapsed: Duration,
}

/// The sum of all runtime bounds.
pub fn overall_rc(state: &AnalysisState) -> Bound {
    Bound::sum(state.rb.values().cloned())
}

fn samples(vars: &BTreeSet<String>) -> Vec<Valuation> {
    let values: &[u64] = match vars.len() {
        0..=2 => &[0, 1, 2, 3, 5, 8, 13],
        3 => &[0, 1, 2, 4, 7],
        _ => &[0, 1, 3],
    };
    sample_grid(vars, values)
}

fn total(b: &Bound, samples: &[Valuation]) -> Option<BigUint> {
    let mut acc = BigUint::default();
    for s in samples {
        match b.eval(s).ok()? {
            NatOmega::Fin(v) => acc += v,
            NatOmega::Omega => return None,
        }
    }
    Some(acc)
}

/// `new` replaces `old` if `old` is ω, or `new ≤ old` on all samples and `<` somewhere.
fn improves(new: &Bound, old: &Bound) -> bool {
    if !new.is_finite() {
        return false;
    }
    if !old.is_finite() {
        return true;
    }
    let vars: BTreeSet<String> = new.vars().union(&old.vars()).cloned().collect();
    let mut strict = false;
    for s in samples(&vars) {
        match (new.eval(&s), old.eval(&s)) {
            (Ok(a), Ok(b)) if a <= b => strict |= a < b,
            _ => return false,
        }
    }
    strict
}

struct Driver<'a> {
    prog: &'a Program,
    cfg: &'a AnalysisConfig,
    sloc: LocalSizes,
    rvg: Rvg,
    st: AnalysisState,
}

impl Driver<'_> {
    fn recompute_sizes(&mut self) {
        let ctx = SizeContext {
            prog: self.prog,
            sloc: &self.sloc,
            rvg: &self.rvg,
            rb: &self.st.rb,
            depth: &self.st.depth,
            refine_scale: self.cfg.refine_scale,
        };
        let (sb, rules) = size::size_bounds(&ctx);
        self.st.sb = sb;
        self.st.sb_rule = rules;
    }

    fn local_bounds(&self, tp: &BTreeSet<usize>, t: usize) -> Result<Vec<(Technique, BTreeMap<Location, Bound>, Option<rf::Synthesized>)>, AnalysisError> {
        let prog = self.prog;
        let parts = rf::recursive_parts(prog, tp)?;
        let everywhere = |b: &dyn Fn(&Location) -> Bound| parts.locations.iter().map(|l| (l.clone(), b(l))).collect::<BTreeMap<_, _>>();
        let mut out = Vec::new();
        let tr = &prog.transitions[t];
        if tp.len() == 1 && tr.source == tr.target {
            if let Some(b) = twn::twn_local_bound(prog, t, &self.cfg.smt)? {
                out.push((Technique::Twn, BTreeMap::from([(tr.source.clone(), b)]), None));
            }
        }
        if parts.rec_calls.is_empty() {
            if let Some((r, certificate)) = rf::synthesize_rf(prog, tp, t, &self.cfg.smt)? {
                let local = everywhere(&|l| rf::local_bound_from_rf(&r, l));
                let triple = RankingTriple { rd: r, ..Default::default() };
                out.push((Technique::Rf, local, Some(rf::Synthesized { triple, certificate })));
            }
        }
        if let Some(b) = rf::chain_local_bound(prog, tp, t)? {
            out.push((Technique::Chain, everywhere(&|_| b.clone()), None));
        }
        if !parts.rec_calls.is_empty() {
            if let Some(s) = rf::synthesize_rho_rf(prog, tp, t, &self.cfg.smt)? {
                let tr: &RankingTriple = &s.triple;
                let local = everywhere(&|l| rf::local_bound_from_rho_rf(tr, l, parts.nfc));
                out.push((Technique::RhoRf, local, Some(s)));
            }
        }
        Ok(out)
    }

    /// One pass over all location SCCs; returns whether some runtime bound improved.
    fn sweep(&mut self) -> Result<bool, AnalysisError> {
        let prog = self.prog;
        let init = prog.initial_transitions();
        let mut any = false;
        for scc in location_sccs(prog) {
            let from: Vec<usize> =
                (0..prog.transitions.len()).filter(|t| scc.contains(&prog.transitions[*t].source) && !init.contains(t)).collect();
            let inner: BTreeSet<usize> = from.iter().copied().filter(|t| scc.contains(&prog.transitions[*t].target)).collect();
            for &t in &from {
                let mut candidates = vec![BTreeSet::from([t])];
                let mut with_t = inner.clone();
                with_t.insert(t);
                let all: BTreeSet<usize> = from.iter().copied().collect();
                for c in [with_t, all] {
                    if c.len() > 1 && !candidates.contains(&c) {
                        candidates.push(c);
                    }
                }
                let mut best: Option<LocalRecord> = None;
                for tp in candidates {
                    for (technique, local, triple) in self.local_bounds(&tp, t)? {
                        let lifted = lift_runtime(prog, &self.st.rb, &self.st.sb, &tp, &local)?.simplify();
                        if !lifted.is_finite() {
                            continue;
                        }
                        let depth = entry_depth(prog, &self.st.rb, &self.st.sb, &tp, &local)?.simplify();
                        let rec = LocalRecord { transition: t, subprogram: tp.clone(), technique, local, lifted, depth, triple };
                        let better = match &best {
                            None => true,
                            Some(b) => improves(&rec.lifted, &b.lifted) || (!improves(&b.lifted, &rec.lifted) && smaller_total(&rec.lifted, &b.lifted)),
                        };
                        if better {
                            best = Some(rec);
                        }
                    }
                }
                let Some(rec) = best else { continue };
                let old = self.st.rb[&t].clone();
                if improves(&rec.lifted, &old) {
                    self.st.rb.insert(t, rec.lifted.clone());
                    self.st.rb_rule.insert(t, rec.technique);
                    if rec.depth.is_finite() {
                        self.st.depth.insert(t, Depth { bound: rec.depth.clone(), subprogram: rec.subprogram.clone() });
                    }
                    self.st.records.push(rec);
                    self.st.rb_record.insert(t, self.st.records.len() - 1);
                    self.recompute_sizes();
                    any = true;
                }
            }
        }
        Ok(any)
    }
}

fn smaller_total(a: &Bound, b: &Bound) -> bool {
    let vars: BTreeSet<String> = a.vars().union(&b.vars()).cloned().collect();
    let s = samples(&vars);
    match (total(a, &s), total(b, &s)) {
        (Some(x), Some(y)) => x < y || (x == y && a.to_string().len() < b.to_string().len()),
        (Some(_), None) => true,
        _ => false,
    }
}

pub fn analyze(prog: &Program, cfg: &AnalysisConfig) -> Result<Analysis, AnalysisError> {
    let start = Instant::now();
    let program = if cfg.invariants { invariants::strengthen(prog) } else { prog.clone() };
    let sloc = size::local_size_bounds(&program, &cfg.smt)?;
    let rvg = size::build_rvg(&program, &sloc);
    let init = program.initial_transitions();
    let mut st = AnalysisState {
        rb: BTreeMap::new(),
        rb_rule: BTreeMap::new(),
        rb_record: BTreeMap::new(),
        sb: SizeBounds::new(),
        sb_rule: BTreeMap::new(),
        depth: BTreeMap::new(),
        records: Vec::new(),
    };
    for t in 0..program.transitions.len() {
        let initial = init.contains(&t);
        st.rb.insert(t, if initial { Bound::one() } else { Bound::omega() });
        st.rb_rule.insert(t, if initial { Technique::Initial } else { Technique::Unbounded });
    }
    let mut d = Driver { prog: &program, cfg, sloc, rvg, st };
    d.recompute_sizes();
    for _ in 0..cfg.sweeps {
        if !d.sweep()? {
            break;
        }
    }
    let overall = overall_rc(&d.st);
    let class = overall.asymptotic_class();
    let Driver { sloc, rvg, st, .. } = d;
    Ok(Analysis { program, sloc, rvg, state: st, overall, class, elapsed: start.elapsed() })
}

/// `true` iff every transition gets a finite runtime bound.
pub fn prove_termination(prog: &Program, cfg: &AnalysisConfig) -> Result<bool, AnalysisError> {
    let a = analyze(prog, cfg)?;
    Ok(a.state.rb.values().all(Bound::is_finite))
}

impl Analysis {
    pub fn rb_by_id(&self) -> BTreeMap<String, Bound> {
        self.state.rb.iter().map(|(t, b)| (self.program.transitions[*t].id.clone(), b.clone())).collect()
    }

    /// Size bounds keyed by `(transition or call id, variable)`.
    pub fn sb_by_id(&self) -> BTreeMap<(String, String), Bound> {
        self.state.sb.iter().map(|(rv, b)| ((size::theta_name(&self.program, &rv.0), rv.1.clone()), b.clone())).collect()
    }

    pub fn worst_case(&self) -> String {
        match self.class {
            AsymptoticClass::Omega => "WORST_CASE(?, ?)".into(),
            c => format!("WORST_CASE(?, O({}))", c.worst_case()),
        }
    }

    /// First transition without a finite bound.
    pub fn blocking(&self) -> Option<String> {
        self.state.rb.iter().find(|(_, b)| !b.is_finite()).map(|(t, _)| self.program.transitions[*t].id.clone())
    }

    pub fn report_text(&self) -> String {
        let p = &self.program;
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.worst_case());
        let _ = writeln!(s, "\nRuntime bounds:");
        for (t, b) in &self.state.rb {
            let rule = self.state.rb_rule[t];
            let via = match self.state.rb_record.get(t) {
                Some(&i) => {
                    let ids: Vec<&str> = self.state.records[i].subprogram.iter().map(|&u| p.transitions[u].id.as_str()).collect();
                    format!("{rule:?} on {{{}}}", ids.join(", "))
                }
                None => format!("{rule:?}"),
            };
            let _ = writeln!(s, "  {}: {}  [{}]", p.transitions[*t].id, b, via);
        }
        let _ = writeln!(s, "\nSize bounds:");
        for (rv, b) in &self.state.sb {
            let _ = writeln!(s, "  {}: {}  [{:?}]", size::rv_name(p, rv), b, self.state.sb_rule[rv]);
        }
        let _ = writeln!(s, "\nOverall: {}", self.overall);
        let _ = writeln!(s, "Class: {}", self.class);
        if let Some(t) = self.blocking() {
            let _ = writeln!(s, "Unbounded: {t}");
        }
        s
    }

    pub fn report_json(&self) -> serde_json::Value {
        let p = &self.program;
        let runtime: Vec<serde_json::Value> = self
            .state
            .rb
            .iter()
            .map(|(t, b)| {
                let sub: Vec<String> = self
                    .state
                    .rb_record
                    .get(t)
                    .map(|&i| self.state.records[i].subprogram.iter().map(|&u| p.transitions[u].id.clone()).collect())
                    .unwrap_or_default();
                serde_json::json!({
                    "transition": p.transitions[*t].id,
                    "bound": b.to_string(),
                    "finite": b.is_finite(),
                    "technique": self.state.rb_rule[t],
                    "subprogram": sub,
                })
            })
            .collect();
        let sizes: Vec<serde_json::Value> = self
            .state
            .sb
            .iter()
            .map(|(rv, b)| {
                serde_json::json!({
                    "source": size::theta_name(p, &rv.0),
                    "variable": rv.1,
                    "bound": b.to_string(),
                    "rule": self.state.sb_rule[rv],
                })
            })
            .collect();
        serde_json::json!({
            "worst_case": self.worst_case(),
            "class": self.class.to_string(),
            "overall": self.overall.to_string(),
            "runtime": runtime,
            "size": sizes,
            "elapsed_ms": self.elapsed.as_millis() as u64,
        })
    }
}
