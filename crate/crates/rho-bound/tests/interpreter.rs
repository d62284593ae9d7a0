use std::collections::BTreeMap;

use num_bigint::BigInt;
use proptest::prelude::*;
use rho_bound::interp::{run, EdgeLabel, EpsPolicy, Scheduler};
use rho_bound::its::{state_env, Program, State};
use rho_bound::parser::parse;
use rho_bound::poly::Sym;

const FACTSUM: &str = include_str!("../corpus/factsum.koat");

fn state(prog: &Program, vals: &[i64]) -> State {
    prog.variables.iter().zip(vals).map(|(v, x)| (v.clone(), BigInt::from(*x))).collect()
}

/// Call-stack evaluator: takes the first enabled transition, evaluating calls by recursion.
fn oracle(prog: &Program, loc: &str, mut sigma: State, counts: &mut BTreeMap<String, u64>, fuel: &mut u64) -> Option<(String, State)> {
    let mut loc = loc.to_string();
    loop {
        let Some(t) = prog.transitions.iter().find(|t| t.source == loc && t.guard.eval(&sigma)) else {
            return Some((loc, sigma));
        };
        if *fuel == 0 {
            return None;
        }
        *fuel -= 1;
        *counts.entry(t.id.clone()).or_default() += 1;
        let mut env = state_env(&sigma);
        for cid in t.calls() {
            let c = prog.call(&cid).unwrap();
            let args: State = c.zeta.iter().map(|(v, p)| (v.clone(), p.eval_map(&state_env(&sigma)).unwrap())).collect();
            let (end, res) = oracle(prog, &c.target, args, counts, fuel)?;
            let rv = prog.returns.get(&end)?;
            env.insert(Sym::Call(cid), res[rv].clone());
        }
        sigma = t.eta.iter().map(|(v, p)| (v.clone(), p.eval_map(&env).unwrap())).collect();
        loc = t.target.clone();
    }
}

#[test]
fn oracle_confirms_factsum_counts() {
    let p = parse(FACTSUM).unwrap();
    let mut counts = BTreeMap::new();
    let mut fuel = 1000;
    oracle(&p, &p.initial, state(&p, &[0, 2, 0]), &mut counts, &mut fuel).unwrap();
    let expect: BTreeMap<String, u64> =
        [("t0", 1), ("t1", 2), ("t2", 1), ("t3", 3), ("t4", 2), ("t5", 3)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    assert_eq!(counts, expect);
    assert_eq!(counts.values().sum::<u64>(), 12);
}

#[test]
fn factsum_run_matches_tree() {
    let p = parse(FACTSUM).unwrap();
    let r = run(&p, &state(&p, &[0, 2, 0]), Scheduler::first_match());
    assert_eq!(r.total, 12);
    assert!(!r.exhausted);
    let counts: Vec<u64> = ["t0", "t1", "t2", "t3", "t4", "t5"].iter().map(|t| r.edge_counts[*t]).collect();
    assert_eq!(counts, vec![1, 2, 1, 3, 2, 3]);
    let has = |loc: &str, vals: &[i64]| {
        let s = state(&p, vals);
        r.tree.nodes.iter().any(|n| n.location == loc && n.state.as_ref() == Some(&s))
    };
    assert!(has("f1", &[2, 2, 0]));
    assert!(has("f2", &[2, 2, 0]));
    assert!(has("f2", &[1, 2, 0]));
    assert!(has("f1", &[1, 2, 0]));
    assert!(has("f1", &[0, 2, 0]));
    // the first t1 step out of the root
    let root_t = r.tree.nodes[r.tree.nodes[0].t_child.unwrap()].t_child.unwrap();
    assert_eq!(r.tree.nodes[root_t].location, "l1");
    assert_eq!(r.tree.nodes[root_t].state, Some(state(&p, &[0, 1, 2])));
    let dot = r.tree.to_dot(&p);
    assert!(dot.contains("f2 (2,2,0)"));
}

#[test]
fn false_initial_guard_runs_nothing() {
    let p = parse("(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x) (RULES l0(x) -> l1(x) :|: x > 0)").unwrap();
    let r = run(&p, &state(&p, &[0]), Scheduler::first_match());
    assert_eq!(r.total, 0);
    assert!(!r.exhausted);
}

fn corpus(name: &str) -> Program {
    let path = format!("{}/corpus/{name}.koat", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const DETERMINISTIC: &[&str] = &["factsum", "factsum_variant", "fac", "fib", "insertion", "countdown", "nested", "phases", "race"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpreter_agrees_with_oracle(which in 0..DETERMINISTIC.len(), vals in prop::collection::vec(-6i64..=6, 3)) {
        let p = corpus(DETERMINISTIC[which]);
        let s = state(&p, &vals);
        let mut counts = BTreeMap::new();
        let mut fuel = 5000;
        if oracle(&p, &p.initial, s.clone(), &mut counts, &mut fuel).is_some() {
            for sched in [Scheduler::first_match(), Scheduler::random(7), Scheduler::random(8).with_eps(EpsPolicy::Deferred)] {
                let r = run(&p, &s, sched);
                for t in &p.transitions {
                    prop_assert_eq!(r.edge_counts[&t.id], counts.get(&t.id).copied().unwrap_or(0));
                }
            }
        }
    }

    #[test]
    fn tree_shape_invariants(which in 0..DETERMINISTIC.len(), vals in prop::collection::vec(-5i64..=5, 3), seed in 0u64..1000) {
        let p = corpus(DETERMINISTIC[which]);
        let s = state(&p, &vals);
        let r = run(&p, &s, Scheduler::random(seed).with_fuel(2000));
        let mut t_out = vec![0usize; r.tree.nodes.len()];
        for n in &r.tree.nodes {
            if let Some((par, EdgeLabel::Transition(_))) = &n.parent {
                t_out[*par] += 1;
            }
        }
        prop_assert!(t_out.iter().all(|&k| k <= 1));
        let max_calls = p.transitions.iter().map(|t| t.calls().len()).max().unwrap_or(0);
        prop_assert!(r.tree.num_call_edges() <= r.tree.num_t_edges() * max_calls);
        prop_assert_eq!(r.tree.num_t_edges() as u64, r.total);
    }

    #[test]
    fn eps_order_is_irrelevant(which in 0..DETERMINISTIC.len(), vals in prop::collection::vec(-5i64..=5, 3), seed in 0u64..1000) {
        let p = corpus(DETERMINISTIC[which]);
        let s = state(&p, &vals);
        let eager = run(&p, &s, Scheduler::random(seed).with_fuel(3000));
        let lazy = run(&p, &s, Scheduler::random(seed ^ 0x5555).with_fuel(3000).with_eps(EpsPolicy::Deferred));
        if !eager.exhausted && !lazy.exhausted {
            let finals = |r: &rho_bound::interp::RunResult| {
                let mut v: Vec<(String, State)> = r.tree.nodes.iter().filter_map(|n| Some((n.location.clone(), n.state.clone()?))).collect();
                v.sort();
                v
            };
            prop_assert_eq!(finals(&eager), finals(&lazy));
        }
    }
}
