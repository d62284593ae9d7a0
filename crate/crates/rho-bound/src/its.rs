//! Integer transition systems with function calls embedded in updates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;

use crate::poly::{Polynomial, Sym};

pub type Location = String;
/// Total map from program variables to integers.
pub type State = BTreeMap<String, BigInt>;

/// `lhs < rhs`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub lhs: Polynomial,
    pub rhs: Polynomial,
}

impl Atom {
    pub fn lt(lhs: Polynomial, rhs: Polynomial) -> Atom {
        Atom { lhs, rhs }
    }

    /// `lhs <= rhs`, stored as `lhs < rhs + 1`.
    pub fn le(lhs: Polynomial, rhs: Polynomial) -> Atom {
        Atom { lhs, rhs: &rhs + &Polynomial::int(1) }
    }

    /// `rhs - lhs`, which is positive exactly when the atom holds.
    pub fn gap(&self) -> Polynomial {
        &self.rhs - &self.lhs
    }

    pub fn is_linear(&self) -> bool {
        self.lhs.is_linear() && self.rhs.is_linear()
    }

    pub fn eval(&self, env: &BTreeMap<Sym, BigInt>) -> Option<bool> {
        Some(self.lhs.eval_map(env)? < self.rhs.eval_map(env)?)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} < {}", self.lhs, self.rhs)
    }
}

/// Conjunction of atoms; empty means `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub atoms: Vec<Atom>,
}

impl Constraint {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Constraint { atoms }
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn and(&self, other: &Constraint) -> Constraint {
        let mut atoms = self.atoms.clone();
        for a in &other.atoms {
            if !atoms.contains(a) {
                atoms.push(a.clone());
            }
        }
        Constraint { atoms }
    }

    pub fn eval_env(&self, env: &BTreeMap<Sym, BigInt>) -> Option<bool> {
        for a in &self.atoms {
            if !a.eval(env)? {
                return Some(false);
            }
        }
        Some(true)
    }

    /// Panics if the state misses a variable of the constraint.
    pub fn eval(&self, state: &State) -> bool {
        self.eval_env(&state_env(state)).expect("state does not cover the constraint")
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.atoms.iter().flat_map(|a| a.lhs.vars().into_iter().chain(a.rhs.vars())).collect()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

pub fn state_env(state: &State) -> BTreeMap<Sym, BigInt> {
    state.iter().map(|(k, v)| (Sym::Var(k.clone()), v.clone())).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionCall {
    pub id: String,
    pub target: Location,
    pub zeta: BTreeMap<String, Polynomial>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub source: Location,
    pub target: Location,
    pub guard: Constraint,
    pub eta: BTreeMap<String, Polynomial>,
}

impl Transition {
    /// Call ids occurring in the update, in id order.
    pub fn calls(&self) -> BTreeSet<String> {
        self.eta.values().flat_map(|p| p.calls()).collect()
    }

    pub fn has_calls(&self) -> bool {
        self.eta.values().any(|p| p.has_calls())
    }

    /// Number of call occurrences in the update, counting each call symbol once.
    pub fn num_calls_into(&self, calls: &BTreeSet<String>) -> usize {
        self.calls().intersection(calls).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub variables: Vec<String>,
    pub locations: BTreeSet<Location>,
    pub initial: Location,
    pub returns: BTreeMap<Location, String>,
    pub calls: Vec<FunctionCall>,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

impl Program {
    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn call(&self, id: &str) -> Option<&FunctionCall> {
        self.calls.iter().find(|c| c.id == id)
    }

    pub fn call_index(&self, id: &str) -> Option<usize> {
        self.calls.iter().position(|c| c.id == id)
    }

    pub fn is_return(&self, loc: &str) -> bool {
        self.returns.contains_key(loc)
    }

    pub fn initial_transitions(&self) -> BTreeSet<usize> {
        (0..self.transitions.len()).filter(|&i| self.transitions[i].source == self.initial).collect()
    }

    /// Calls occurring in the update of transition `t`.
    pub fn funs_of_transition(&self, t: usize) -> BTreeSet<String> {
        self.transitions[t].calls()
    }

    pub fn funs_of_transitions(&self, ts: &BTreeSet<usize>) -> BTreeSet<String> {
        ts.iter().flat_map(|&t| self.funs_of_transition(t)).collect()
    }

    /// Declared calls whose target lies in `locs`.
    pub fn funs_of_locations(&self, locs: &BTreeSet<Location>) -> BTreeSet<String> {
        self.calls.iter().filter(|c| locs.contains(&c.target)).map(|c| c.id.clone()).collect()
    }

    /// Transitions whose update mentions the call.
    pub fn trans_of(&self, call: &str) -> BTreeSet<usize> {
        (0..self.transitions.len())
            .filter(|&i| self.transitions[i].calls().contains(call))
            .collect()
    }

    pub fn trans_of_set(&self, calls: &BTreeSet<String>) -> BTreeSet<usize> {
        calls.iter().flat_map(|c| self.trans_of(c)).collect()
    }

    pub fn sources(&self, ts: &BTreeSet<usize>) -> BTreeSet<Location> {
        ts.iter().map(|&t| self.transitions[t].source.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut d = |subject: &str, message: String| {
            diags.push(Diagnostic { subject: subject.to_string(), message })
        };
        let vars: BTreeSet<&String> = self.variables.iter().collect();
        if vars.len() != self.variables.len() {
            d("VAR", "duplicate variable".into());
        }
        for v in &self.variables {
            if v.is_empty() || !v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                d("VAR", format!("invalid variable name `{v}`"));
            }
        }
        if !self.locations.contains(&self.initial) {
            d(&self.initial, "initial location not declared".into());
        }
        if self.is_return(&self.initial) {
            d(&self.initial, "initial location is a return location".into());
        }
        for (l, v) in &self.returns {
            if !self.locations.contains(l) {
                d(l, "return location not declared".into());
            }
            if !vars.contains(v) {
                d(l, format!("return variable `{v}` is not a program variable"));
            }
        }
        let call_ids: BTreeSet<&String> = self.calls.iter().map(|c| &c.id).collect();
        if call_ids.len() != self.calls.len() {
            d("calls", "duplicate call id".into());
        }
        for c in &self.calls {
            if c.target == self.initial {
                d(&c.id, "call targets initial location".into());
            }
            if !self.locations.contains(&c.target) {
                d(&c.id, format!("unknown location `{}`", c.target));
            }
            for v in &self.variables {
                if !c.zeta.contains_key(v) {
                    d(&c.id, format!("argument for `{v}` missing"));
                }
            }
            for (v, p) in &c.zeta {
                if !vars.contains(v) {
                    d(&c.id, format!("unknown variable `{v}`"));
                }
                if p.has_calls() {
                    d(&c.id, "nested call in argument".into());
                }
                for w in p.vars() {
                    if !vars.contains(&w) {
                        d(&c.id, format!("unknown variable `{w}`"));
                    }
                }
            }
        }
        let tids: BTreeSet<&String> = self.transitions.iter().map(|t| &t.id).collect();
        if tids.len() != self.transitions.len() {
            d("transitions", "duplicate transition id".into());
        }
        for t in &self.transitions {
            if self.is_return(&t.source) {
                d(&t.id, "source in Ω".into());
            }
            if t.target == self.initial {
                d(&t.id, "transition targets initial location".into());
            }
            for l in [&t.source, &t.target] {
                if !self.locations.contains(l) {
                    d(&t.id, format!("unknown location `{l}`"));
                }
            }
            for v in &self.variables {
                if !t.eta.contains_key(v) {
                    d(&t.id, format!("update for `{v}` missing"));
                }
            }
            for a in &t.guard.atoms {
                if a.lhs.has_calls() || a.rhs.has_calls() {
                    d(&t.id, "call in guard".into());
                }
            }
            for w in t.guard.vars() {
                if !vars.contains(&w) {
                    d(&t.id, format!("unknown variable `{w}`"));
                }
            }
            for (v, p) in &t.eta {
                if !vars.contains(v) {
                    d(&t.id, format!("unknown variable `{v}`"));
                }
                for s in p.syms() {
                    match s {
                        Sym::Var(w) if !vars.contains(&w) => {
                            d(&t.id, format!("unknown variable `{w}`"))
                        }
                        Sym::Call(c) if !call_ids.contains(&c) => {
                            d(&t.id, format!("unknown call `{c}`"))
                        }
                        _ => {}
                    }
                }
            }
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(diags)
        }
    }
}
