use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rho_bound::analysis::{analyze, AnalysisConfig};
use rho_bound::bounds::{Bound, Valuation};
use rho_bound::interp::{random_state, run, Scheduler};
use rho_bound::invariants::{infer, strengthen};
use rho_bound::its::Program;
use rho_bound::parser::parse;
use rho_bound::poly::{Monomial, Polynomial, Sym};
use rho_bound::size::*;
use rho_bound::smt::SmtConfig;

fn corpus(name: &str) -> Program {
    let path = format!("{}/corpus/{name}.koat", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn corpus_names() -> Vec<String> {
    let dir = format!("{}/corpus", env!("CARGO_MANIFEST_DIR"));
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "koat"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn t(prog: &Program, id: &str) -> Theta {
    Theta::Trans(prog.transition_index(id).unwrap())
}

fn c(prog: &Program, id: &str) -> Theta {
    Theta::Call(prog.call_index(id).unwrap())
}

fn rv(th: Theta, v: &str) -> Rv {
    (th, v.to_string())
}

fn factsum() -> (Program, LocalSizes) {
    let prog = strengthen(&corpus("factsum"));
    let sloc = local_size_bounds(&prog, &SmtConfig::internal()).unwrap();
    (prog, sloc)
}

fn names(prog: &Program, s: &BTreeSet<Theta>) -> Vec<String> {
    s.iter().map(|th| theta_name(prog, th)).collect()
}

#[test]
fn local_size_bounds_factsum() {
    let (p, sloc) = factsum();
    assert_eq!(sloc[&rv(t(&p, "t1"), "x")], Polynomial::var("x"));
    assert_eq!(sloc[&rv(t(&p, "t1"), "y")], &Polynomial::var("y") + &Polynomial::call("rho1"));
    assert_eq!(sloc[&rv(c(&p, "rho2"), "a")], Polynomial::var("a"));
    assert_eq!(sloc[&rv(t(&p, "t4"), "a")], Polynomial::int(1));
    assert_eq!(sloc[&rv(t(&p, "t5"), "a")], &Polynomial::var("a") * &Polynomial::call("rho2"));
}

#[test]
fn predecessors() {
    let (p, _) = factsum();
    assert_eq!(names(&p, &pre(&p, &c(&p, "rho1"))), vec!["t0", "t1"]);
    assert_eq!(names(&p, &pre(&p, &t(&p, "t5"))), vec!["rho1", "rho2"]);
    assert!(pre(&p, &t(&p, "t0")).is_empty());
    let t1 = p.transition_index("t1").unwrap();
    let t5 = p.transition_index("t5").unwrap();
    let expected: BTreeSet<Rv> = [rv(t(&p, "t4"), "a"), rv(t(&p, "t5"), "a")].into();
    assert_eq!(pre_omega(&p, t1, "rho1"), expected);
    assert_eq!(pre_omega(&p, t5, "rho2"), expected);
    assert_eq!(return_var(&p, "rho1").as_deref(), Some("a"));
}

#[test]
fn call_without_return_has_no_omega_predecessors() {
    let p = parse(
        "(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x) (RETURN g1 x) (RULES
           l0(x) -> l1(@f1(x))
           f1(x) -> f1(x - 1) :|: x > 0
           g0(x) -> g1(x))",
    )
    .unwrap();
    assert!(pre_omega(&p, 0, "rho1").is_empty());
}

#[test]
fn rvg_edges_factsum() {
    let (p, sloc) = factsum();
    let g = build_rvg(&p, &sloc);
    assert!(g.rv_edges.contains(&(rv(t(&p, "t1"), "x"), rv(c(&p, "rho1"), "a"))));
    assert!(!g.rv_edges.contains(&(rv(c(&p, "rho1"), "a"), rv(t(&p, "t4"), "a"))));
    for src in ["t4", "t5"] {
        assert!(g.omega_edges.contains(&(rv(t(&p, src), "a"), rv(t(&p, "t1"), "y"))));
    }
    // every edge matches the definition
    for (a, b) in &g.rv_edges {
        assert!(pre(&p, &b.0).contains(&a.0));
        assert!(sloc[b].vars().contains(&a.1));
    }
    for (a, b) in &g.omega_edges {
        let Theta::Trans(tb) = b.0 else { panic!("omega edge into a call") };
        assert!(sloc[b].calls().iter().any(|c| pre_omega(&p, tb, c).contains(a)));
    }
}

#[test]
fn rvg_nontrivial_sccs_factsum() {
    let (p, sloc) = factsum();
    let g = build_rvg(&p, &sloc);
    let nontrivial: BTreeSet<String> = g
        .sccs()
        .into_iter()
        .filter(|s| !g.is_trivial(s))
        .flat_map(|s| s.into_iter().map(|r| rv_name(&p, &r)))
        .collect();
    for n in ["t1,x", "rho2,a", "t1,y", "t3,y", "t5,a"] {
        assert!(nontrivial.contains(n), "{n}");
    }
    assert!(!nontrivial.contains("t4,a"));
}

#[test]
fn dot_is_deterministic() {
    let (p, sloc) = factsum();
    let a = build_rvg(&p, &sloc).to_dot(&p);
    let b = build_rvg(&p, &local_size_bounds(&p, &SmtConfig::internal()).unwrap()).to_dot(&p);
    assert_eq!(a, b);
    assert!(a.contains("\"t5,a\" -> \"t1,y\" [style=dashed];"));
    assert!(a.contains("\"t1,x\" -> \"rho1,a\";"));
}

#[test]
fn decompositions_from_examples() {
    let a = Polynomial::var("a");
    let d = decompose_sloc(&(&a * &Polynomial::call("rho2"))).unwrap();
    assert_eq!((d.scale, d.add, d.residual), (a.clone(), BigInt::from(0), BTreeSet::from([Sym::call("rho2")])));
    let d = decompose_sloc(&(&Polynomial::var("y") + &Polynomial::call("rho1"))).unwrap();
    assert_eq!((d.scale, d.add, d.residual), (Polynomial::int(1), BigInt::from(0), BTreeSet::from([Sym::var("y"), Sym::call("rho1")])));
    let d = decompose_sloc(&Polynomial::var("x").scale(&BigInt::from(2))).unwrap();
    assert_eq!((d.scale, d.add, d.residual), (Polynomial::int(2), BigInt::from(0), BTreeSet::from([Sym::var("x")])));
    let x = Polynomial::var("x");
    let d = decompose_sloc(&(&x * &x)).unwrap();
    assert_eq!((d.scale, d.add, d.residual), (&x * &x, BigInt::from(1), BTreeSet::new()));
}

fn sb(a: &rho_bound::analysis::Analysis, th: &str, v: &str) -> String {
    a.sb_by_id()[&(th.to_string(), v.to_string())].to_string()
}

#[test]
fn global_size_bounds_factsum() {
    let a = analyze(&corpus("factsum"), &AnalysisConfig::default()).unwrap();
    assert_eq!(sb(&a, "t0", "x"), "x");
    assert_eq!(sb(&a, "t4", "a"), "1");
    assert_eq!(sb(&a, "rho1", "a"), "x");
    assert_eq!(sb(&a, "rho2", "a"), "x");
    assert_eq!(sb(&a, "t1", "x"), "x");
    assert_eq!(sb(&a, "t1", "y"), "y + x*x^x");
    assert_eq!(sb(&a, "t2", "y"), "y + x*x^x");
    let t5 = a.program.transition_index("t5").unwrap();
    assert_eq!(a.state.sb_rule[&(Theta::Trans(t5), "a".to_string())], SizeRule::Scaled);
    let t1 = a.program.transition_index("t1").unwrap();
    assert_eq!(a.state.sb_rule[&(Theta::Trans(t1), "y".to_string())], SizeRule::Additive);
}

#[test]
fn unrefined_scale_factsum() {
    let cfg = AnalysisConfig { refine_scale: false, ..AnalysisConfig::default() };
    let a = analyze(&corpus("factsum"), &cfg).unwrap();
    assert_eq!(sb(&a, "t5", "a"), "x^(x^2)");
    assert_eq!(sb(&a, "t1", "y"), "y + x*x^(x^2)");
}

#[test]
fn call_result_overwrites_variable() {
    let a = analyze(&corpus("factsum_variant"), &AnalysisConfig::default()).unwrap();
    assert_eq!(sb(&a, "t1", "y"), "x^x");
    let t1 = a.program.transition_index("t1").unwrap();
    assert_eq!(a.state.sb_rule[&(Theta::Trans(t1), "y".to_string())], SizeRule::TrivialCall);
}

#[test]
fn substitution_order() {
    // variables are instantiated before call results, which are already in terms of the initial state
    let p = parse(
        "(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x y) (RETURN f2 y) (RULES
           l0(x,y) -> l1(2*x, y)
           l1(x,y) -> l2(x, @f1(x,y))
           f1(x,y) -> f2(x, x))",
    )
    .unwrap();
    let a = analyze(&p, &AnalysisConfig::default()).unwrap();
    assert_eq!(sb(&a, "t1", "y"), "2*x");
    assert_ne!(sb(&a, "t1", "y"), "4*x");
}

#[test]
fn never_returning_call_gives_zero() {
    let p = parse(
        "(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x y) (RETURN g1 y) (RULES
           l0(x,y) -> l1(x, @f1(x,y))
           f1(x,y) -> f1(x - 1, y) :|: x > 0
           g0(x,y) -> g1(x, y))",
    )
    .unwrap();
    let a = analyze(&p, &AnalysisConfig::default()).unwrap();
    assert_eq!(sb(&a, "t0", "y"), "0");
}

#[test]
fn doubled_call_result() {
    let p = parse(
        "(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x y) (RETURN f2 y) (RULES
           l0(x,y) -> l1(x, 2 * @f1(x,y))
           f1(x,y) -> f2(x, 1))",
    )
    .unwrap();
    let a = analyze(&p, &AnalysisConfig::default()).unwrap();
    assert_eq!(sb(&a, "t0", "y"), "2");
}

#[test]
fn additive_scc_degenerates() {
    // y grows by x in every iteration: SB = y + rb*x with scale 1
    let p = parse(
        "(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x y n) (RULES
           l0(x,y,n) -> l1(x, y, n)
           l1(x,y,n) -> l1(x, y + x, n - 1) :|: n > 0)",
    )
    .unwrap();
    let a = analyze(&p, &AnalysisConfig::default()).unwrap();
    assert_eq!(a.rb_by_id()["t1"].to_string(), "n");
    assert_eq!(sb(&a, "t1", "y"), "y + n*x");
    let t1 = a.program.transition_index("t1").unwrap();
    assert_eq!(a.state.sb_rule[&(Theta::Trans(t1), "y".to_string())], SizeRule::Additive);
}

#[test]
fn unchanged_variable_in_nested_loops() {
    let a = analyze(&corpus("nested"), &AnalysisConfig::default()).unwrap();
    for th in ["t1", "t2", "t3"] {
        assert_eq!(sb(&a, th, "n"), "n", "{th}");
    }
}

#[test]
fn invariants_hold_on_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in corpus_names() {
        let p = corpus(&name);
        let inv = infer(&p);
        for trial in 0..40 {
            let s = random_state(&p, &mut rng, 16);
            let sched = if trial % 2 == 0 { Scheduler::first_match() } else { Scheduler::random(trial) };
            let r = run(&p, &s, sched.with_fuel(2_000));
            for node in &r.tree.nodes {
                let Some(state) = &node.state else { continue };
                if node.location == p.initial {
                    continue;
                }
                let env = inv.get(&node.location).unwrap_or_else(|| panic!("{name}: {} reached but inferred unreachable", node.location));
                for (v, x) in state {
                    if let Some(iv) = env.get(v) {
                        assert!(iv.contains(x), "{name}: {v}={x} at {}", node.location);
                    }
                }
            }
        }
    }
}

fn poly_from(coeffs: &[u8]) -> Polynomial {
    // monomials over x, y, @rho1 of degree ≤ 2
    let syms = [Sym::var("x"), Sym::var("y"), Sym::call("rho1")];
    let mut monos: Vec<Monomial> = vec![Monomial::new()];
    for s in &syms {
        monos.push([(s.clone(), 1)].into());
    }
    for i in 0..3 {
        for j in i..3 {
            let mut m = Monomial::new();
            *m.entry(syms[i].clone()).or_default() += 1;
            *m.entry(syms[j].clone()).or_default() += 1;
            monos.push(m);
        }
    }
    Polynomial::from_terms(monos.into_iter().zip(coeffs).map(|(m, c)| (m, BigInt::from(*c))))
}

fn eval_nat(p: &Polynomial, env: &BTreeMap<Sym, BigInt>) -> BigInt {
    p.eval_map(env).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decomposition_is_sound(
        coeffs in prop::collection::vec(prop_oneof![Just(0u8), Just(0u8), 0u8..4], 10),
        vals in prop::collection::vec(0i64..50, 3),
    ) {
        let p = poly_from(&coeffs);
        if let Some(d) = decompose_sloc(&p) {
            let env: BTreeMap<Sym, BigInt> = [Sym::var("x"), Sym::var("y"), Sym::call("rho1")]
                .into_iter()
                .zip(vals.iter().map(|v| BigInt::from(*v)))
                .collect();
            let mut inner = BigInt::from(d.add.clone());
            for s in &d.residual {
                inner += &env[s];
            }
            prop_assert!(eval_nat(&p, &env) <= eval_nat(&d.scale, &env) * inner, "{} vs {:?}", p, d);
        }
    }
}

#[test]
fn size_bounds_evaluate() {
    let a = analyze(&corpus("factsum"), &AnalysisConfig::default()).unwrap();
    let v: Valuation = [("a", 0u64), ("x", 2), ("y", 0)].into_iter().map(|(k, x)| (k.to_string(), BigUint::from(x))).collect();
    let b: &Bound = &a.sb_by_id()[&("t1".to_string(), "y".to_string())];
    assert_eq!(b.eval(&v).unwrap().finite().cloned(), Some(BigUint::from(8u32)));
}
