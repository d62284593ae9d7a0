//! Evaluation trees: concrete execution, step counting, and bound checking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bounds::{Bound, NatOmega, Valuation};
use crate::its::{state_env, Location, Program, State};
use crate::poly::Sym;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeLabel {
    /// Index into `Program::transitions`.
    Transition(usize),
    /// Call id.
    Call(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub location: Location,
    /// `None` is ⊥.
    pub state: Option<State>,
    pub parent: Option<(usize, EdgeLabel)>,
    pub t_child: Option<usize>,
    pub call_children: Vec<(String, usize)>,
    /// First node of the frame chain containing this node.
    pub frame_root: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepError {
    #[error("node {0} is not a leaf")]
    NotLeaf(usize),
    #[error("node {0} has an undefined state")]
    Undefined(usize),
    #[error("transition does not start at the node's location")]
    WrongSource,
    #[error("guard does not hold")]
    GuardFails,
    #[error("not ready")]
    NotReady,
    #[error("update has no calls")]
    NoCalls,
}

impl EvalTree {
    pub fn new(location: &str, state: State) -> Self {
        EvalTree {
            nodes: vec![Node {
                location: location.to_string(),
                state: Some(state),
                parent: None,
                t_child: None,
                call_children: Vec::new(),
                frame_root: 0,
            }],
        }
    }

    fn push(&mut self, location: &str, state: Option<State>, parent: (usize, EdgeLabel), frame_root: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            location: location.to_string(),
            state,
            parent: Some(parent),
            t_child: None,
            call_children: Vec::new(),
            frame_root: frame_root.unwrap_or(id),
        });
        id
    }

    /// Extends `leaf` by transition `t`; returns the new frame node.
    pub fn step_t(&mut self, prog: &Program, leaf: usize, t: usize) -> Result<usize, StepError> {
        let node = &self.nodes[leaf];
        if node.t_child.is_some() {
            return Err(StepError::NotLeaf(leaf));
        }
        let sigma = node.state.as_ref().ok_or(StepError::Undefined(leaf))?;
        let tr = &prog.transitions[t];
        if tr.source != node.location {
            return Err(StepError::WrongSource);
        }
        if !tr.guard.eval(sigma) {
            return Err(StepError::GuardFails);
        }
        let env = state_env(sigma);
        let frame_root = node.frame_root;
        if !tr.has_calls() {
            let next: State = tr
                .eta
                .iter()
                .map(|(v, p)| (v.clone(), p.eval_map(&env).expect("update over program variables")))
                .collect();
            let c = self.push(&tr.target, Some(next), (leaf, EdgeLabel::Transition(t)), Some(frame_root));
            self.nodes[leaf].t_child = Some(c);
            return Ok(c);
        }
        let mut children = Vec::new();
        for cid in tr.calls() {
            let call = prog.call(&cid).expect("validated call");
            let args: State = call
                .zeta
                .iter()
                .map(|(v, p)| (v.clone(), p.eval_map(&env).expect("argument over program variables")))
                .collect();
            let child = self.push(&call.target, Some(args), (leaf, EdgeLabel::Call(cid.clone())), None);
            children.push((cid, child));
        }
        let c = self.push(&tr.target, None, (leaf, EdgeLabel::Transition(t)), Some(frame_root));
        self.nodes[leaf].t_child = Some(c);
        self.nodes[leaf].call_children = children;
        Ok(c)
    }

    /// Last node of the frame chain starting at `n`.
    pub fn frame_end(&self, mut n: usize) -> usize {
        while let Some(c) = self.nodes[n].t_child {
            n = c;
        }
        n
    }

    /// Return value of the frame starting at `child`, once it reached Ω.
    fn returned(&self, prog: &Program, child: usize) -> Option<BigInt> {
        let end = &self.nodes[self.frame_end(child)];
        let v = prog.returns.get(&end.location)?;
        Some(end.state.as_ref()?[v].clone())
    }

    /// Whether the ⊥ successor of `n` can be instantiated.
    pub fn is_ready(&self, prog: &Program, n: usize) -> bool {
        let node = &self.nodes[n];
        match node.t_child {
            Some(c) if self.nodes[c].state.is_none() => {
                node.call_children.iter().all(|(_, ch)| self.returned(prog, *ch).is_some())
            }
            _ => false,
        }
    }

    /// Replaces the ⊥ successor of `n`; returns that successor.
    pub fn step_eps(&mut self, prog: &Program, n: usize) -> Result<usize, StepError> {
        let node = &self.nodes[n];
        let c = node.t_child.ok_or(StepError::NoCalls)?;
        if node.call_children.is_empty() {
            return Err(StepError::NoCalls);
        }
        if !self.is_ready(prog, n) {
            return Err(StepError::NotReady);
        }
        let mut env = state_env(node.state.as_ref().expect("caller state defined"));
        for (cid, ch) in &node.call_children {
            env.insert(Sym::Call(cid.clone()), self.returned(prog, *ch).expect("ready"));
        }
        let Some((_, EdgeLabel::Transition(t))) = self.nodes[c].parent.clone() else {
            unreachable!("frame successor reached by a transition")
        };
        let next: State = prog.transitions[t]
            .eta
            .iter()
            .map(|(v, p)| (v.clone(), p.eval_map(&env).expect("update closed")))
            .collect();
        self.nodes[c].state = Some(next);
        Ok(c)
    }

    /// Caller node waiting on the frame containing `n`, if `n` is a returned frame end.
    fn waiting_caller(&self, prog: &Program, n: usize) -> Option<usize> {
        let node = &self.nodes[n];
        if node.state.is_none() || !prog.is_return(&node.location) || node.t_child.is_some() {
            return None;
        }
        match &self.nodes[node.frame_root].parent {
            Some((p, EdgeLabel::Call(_))) if self.is_ready(prog, *p) => Some(*p),
            _ => None,
        }
    }

    pub fn num_t_edges(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.parent, Some((_, EdgeLabel::Transition(_))))).count()
    }

    pub fn num_call_edges(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.parent, Some((_, EdgeLabel::Call(_))))).count()
    }

    pub fn to_dot(&self, prog: &Program) -> String {
        let mut out = String::from("digraph evaluation {\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let st = match &n.state {
                Some(s) => {
                    let vals: Vec<String> = prog.variables.iter().map(|v| s[v].to_string()).collect();
                    format!("({})", vals.join(","))
                }
                None => "⊥".to_string(),
            };
            let _ = writeln!(out, "  n{i} [label=\"{} {st}\"];", n.location);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match &n.parent {
                Some((p, EdgeLabel::Transition(t))) => {
                    let _ = writeln!(out, "  n{p} -> n{i} [label=\"{}\"];", prog.transitions[*t].id);
                }
                Some((p, EdgeLabel::Call(c))) => {
                    let _ = writeln!(out, "  n{p} -> n{i} [label=\"{c}\", style=dashed];");
                }
                None => {}
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    FirstMatch,
    Random(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsPolicy {
    Eager,
    /// Ready ε-steps compete with t-steps (random strategy only).
    Deferred,
}

pub const DEFAULT_FUEL: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scheduler {
    pub strategy: Strategy,
    pub fuel: u64,
    pub eps: EpsPolicy,
}

impl Scheduler {
    pub fn first_match() -> Self {
        Scheduler { strategy: Strategy::FirstMatch, fuel: DEFAULT_FUEL, eps: EpsPolicy::Eager }
    }

    pub fn random(seed: u64) -> Self {
        Scheduler { strategy: Strategy::Random(seed), fuel: DEFAULT_FUEL, eps: EpsPolicy::Eager }
    }

    pub fn with_fuel(mut self, fuel: u64) -> Self {
        self.fuel = fuel;
        self
    }

    pub fn with_eps(mut self, eps: EpsPolicy) -> Self {
        self.eps = eps;
        self
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.strategy {
            Strategy::FirstMatch => write!(f, "first-match"),
            Strategy::Random(s) => write!(f, "random({s})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub tree: EvalTree,
    /// Keyed by transition id; every transition is present.
    pub edge_counts: BTreeMap<String, u64>,
    pub call_counts: BTreeMap<String, u64>,
    pub total: u64,
    pub exhausted: bool,
}

pub fn run(prog: &Program, sigma0: &State, sched: Scheduler) -> RunResult {
    run_from(prog, None, &prog.initial, sigma0, sched)
}

/// Runs from `(start, sigma0)` using only the transitions in `allowed` when given.
pub fn run_from(
    prog: &Program,
    allowed: Option<&BTreeSet<usize>>,
    start: &str,
    sigma0: &State,
    sched: Scheduler,
) -> RunResult {
    let mut outgoing: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in prog.transitions.iter().enumerate() {
        if allowed.is_none_or(|a| a.contains(&i)) {
            outgoing.entry(t.source.as_str()).or_default().push(i);
        }
    }
    let mut tree = EvalTree::new(start, sigma0.clone());
    let mut edge_counts: BTreeMap<String, u64> = prog.transitions.iter().map(|t| (t.id.clone(), 0)).collect();
    let mut call_counts: BTreeMap<String, u64> = prog.calls.iter().map(|c| (c.id.clone(), 0)).collect();
    let mut leaves: BTreeSet<usize> = BTreeSet::new();
    let mut ready: BTreeSet<usize> = BTreeSet::new();
    let mut rng = match sched.strategy {
        Strategy::Random(s) => Some(ChaCha8Rng::seed_from_u64(s)),
        Strategy::FirstMatch => None,
    };
    let deferred = sched.eps == EpsPolicy::Deferred && rng.is_some();
    if outgoing.contains_key(start) {
        leaves.insert(0);
    }
    let mut total = 0u64;
    let mut exhausted = false;
    // instantiates or queues everything that became ready through node `n`
    let settle = |tree: &mut EvalTree, leaves: &mut BTreeSet<usize>, ready: &mut BTreeSet<usize>, n: usize, eager: bool| {
        let mut work = vec![n];
        while let Some(n) = work.pop() {
            let node = &tree.nodes[n];
            if node.state.is_some() && outgoing.contains_key(node.location.as_str()) {
                leaves.insert(n);
            }
            if let Some(p) = node.parent.as_ref().map(|(p, _)| *p) {
                if tree.nodes[n].state.is_none() && tree.is_ready(prog, p) {
                    if eager {
                        work.push(tree.step_eps(prog, p).expect("ready"));
                    } else {
                        ready.insert(p);
                    }
                    continue;
                }
            }
            if let Some(p) = tree.waiting_caller(prog, n) {
                if eager {
                    work.push(tree.step_eps(prog, p).expect("ready"));
                } else {
                    ready.insert(p);
                }
            }
        }
    };
    loop {
        if deferred && !ready.is_empty() {
            let r = rng.as_mut().unwrap();
            if leaves.is_empty() || r.gen_bool(0.5) {
                let cand: Vec<usize> = ready.iter().copied().collect();
                let p = *cand.choose(r).unwrap();
                ready.remove(&p);
                let c = tree.step_eps(prog, p).expect("ready");
                settle(&mut tree, &mut leaves, &mut ready, c, false);
                continue;
            }
        }
        // pick a leaf and an enabled transition
        let choice = loop {
            if leaves.is_empty() {
                break None;
            }
            let leaf = match rng.as_mut() {
                None => *leaves.iter().next().unwrap(),
                Some(r) => {
                    let idx = r.gen_range(0..leaves.len());
                    *leaves.iter().nth(idx).unwrap()
                }
            };
            let node = &tree.nodes[leaf];
            let sigma = node.state.as_ref().unwrap();
            let enabled: Vec<usize> = outgoing[node.location.as_str()]
                .iter()
                .copied()
                .filter(|&t| prog.transitions[t].guard.eval(sigma))
                .collect();
            if enabled.is_empty() {
                leaves.remove(&leaf);
                continue;
            }
            let t = match rng.as_mut() {
                None => enabled[0],
                Some(r) => *enabled.choose(r).unwrap(),
            };
            break Some((leaf, t));
        };
        let Some((leaf, t)) = choice else {
            if deferred && !ready.is_empty() {
                continue;
            }
            break;
        };
        if total >= sched.fuel {
            exhausted = true;
            break;
        }
        leaves.remove(&leaf);
        let c = tree.step_t(prog, leaf, t).expect("enabled transition");
        total += 1;
        *edge_counts.get_mut(&prog.transitions[t].id).unwrap() += 1;
        for (cid, ch) in tree.nodes[leaf].call_children.clone() {
            *call_counts.get_mut(&cid).unwrap() += 1;
            settle(&mut tree, &mut leaves, &mut ready, ch, !deferred);
        }
        settle(&mut tree, &mut leaves, &mut ready, c, !deferred);
    }
    RunResult { tree, edge_counts, call_counts, total, exhausted }
}

/// Runtime bounds keyed by transition id and size bounds keyed by (transition or call id, variable).
pub type RuntimeBounds = BTreeMap<String, Bound>;
pub type SizeBounds = BTreeMap<(String, String), Bound>;

pub const CHECK_FUEL: u64 = 10_000;

#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub trials: usize,
    pub range: i64,
    pub seed: u64,
    /// Random scheduler seeds tried in addition to first-match.
    pub schedulers: Vec<u64>,
    pub fuel: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { trials: 100, range: 16, seed: 0, schedulers: vec![1, 2, 3], fuel: CHECK_FUEL }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub sigma0: State,
    pub scheduler: Scheduler,
    /// Transition or call id.
    pub subject: String,
    /// `None` for a runtime violation.
    pub variable: Option<String>,
    pub observed: BigUint,
    pub bound: String,
    pub bound_value: Option<NatOmega>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let init: Vec<String> = self.sigma0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let val = match &self.bound_value {
            Some(v) => v.to_string(),
            None => "undefined".into(),
        };
        match &self.variable {
            None => write!(
                f,
                "σ0=({}) [{}]: {} taken {} times, RB = {} = {}",
                init.join(","),
                self.scheduler,
                self.subject,
                self.observed,
                self.bound,
                val
            ),
            Some(v) => write!(
                f,
                "σ0=({}) [{}]: |{}| = {} after {}, SB = {} = {}",
                init.join(","),
                self.scheduler,
                v,
                self.observed,
                self.subject,
                self.bound,
                val
            ),
        }
    }
}

pub fn abs_valuation(sigma: &State) -> Valuation {
    sigma.iter().map(|(k, v)| (k.clone(), v.abs().to_biguint().unwrap())).collect()
}

fn exceeds(observed: &BigUint, bound: &Bound, val: &Valuation) -> Option<Option<NatOmega>> {
    match bound.eval(val) {
        Ok(NatOmega::Omega) => None,
        Ok(NatOmega::Fin(b)) if *observed <= b => None,
        Ok(v) => Some(Some(v)),
        Err(_) => Some(None),
    }
}

/// Checks one run against the bounds; missing entries are treated as ω.
pub fn check_run(
    prog: &Program,
    sigma0: &State,
    sched: Scheduler,
    res: &RunResult,
    rb: &RuntimeBounds,
    sb: &SizeBounds,
) -> Option<Counterexample> {
    let val = abs_valuation(sigma0);
    for (t, n) in &res.edge_counts {
        if let Some(b) = rb.get(t) {
            let obs = BigUint::from(*n);
            if let Some(bv) = exceeds(&obs, b, &val) {
                return Some(Counterexample {
                    sigma0: sigma0.clone(),
                    scheduler: sched,
                    subject: t.clone(),
                    variable: None,
                    observed: obs,
                    bound: b.to_string(),
                    bound_value: bv,
                });
            }
        }
    }
    for node in &res.tree.nodes {
        let (Some((_, label)), Some(state)) = (&node.parent, &node.state) else { continue };
        let subject = match label {
            EdgeLabel::Transition(t) => &prog.transitions[*t].id,
            EdgeLabel::Call(c) => c,
        };
        for (v, x) in state {
            if let Some(b) = sb.get(&(subject.clone(), v.clone())) {
                let obs = x.abs().to_biguint().unwrap();
                if let Some(bv) = exceeds(&obs, b, &val) {
                    return Some(Counterexample {
                        sigma0: sigma0.clone(),
                        scheduler: sched,
                        subject: subject.clone(),
                        variable: Some(v.clone()),
                        observed: obs,
                        bound: b.to_string(),
                        bound_value: bv,
                    });
                }
            }
        }
    }
    None
}

/// Random initial state with values in `[-range, range]`.
pub fn random_state(prog: &Program, rng: &mut impl Rng, range: i64) -> State {
    prog.variables.iter().map(|v| (v.clone(), BigInt::from(rng.gen_range(-range..=range)))).collect()
}

/// Fuzzes the bounds over random initial states and several schedulers.
pub fn check_bounds(prog: &Program, rb: &RuntimeBounds, sb: &SizeBounds, cfg: &CheckConfig) -> Result<(), Counterexample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scheds = vec![Scheduler::first_match().with_fuel(cfg.fuel)];
    scheds.extend(cfg.schedulers.iter().map(|&s| Scheduler::random(s).with_fuel(cfg.fuel)));
    for _ in 0..cfg.trials {
        let sigma0 = random_state(prog, &mut rng, cfg.range);
        for &s in &scheds {
            let res = run(prog, &sigma0, s);
            if let Some(cex) = check_run(prog, &sigma0, s, &res, rb, sb) {
                return Err(cex);
            }
        }
    }
    Ok(())
}
