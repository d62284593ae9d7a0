use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rho_bound::analysis::*;
use rho_bound::bounds::{sample_grid, AsymptoticClass, Bound};
use rho_bound::interp::{check_bounds, CheckConfig};
use rho_bound::its::Program;
use rho_bound::parser::parse;

fn corpus(name: &str) -> Program {
    let path = format!("{}/corpus/{name}.koat", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn ids(prog: &Program, ts: &BTreeSet<usize>) -> Vec<String> {
    ts.iter().map(|t| prog.transitions[*t].id.clone()).collect()
}

fn set(prog: &Program, ids: &[&str]) -> BTreeSet<usize> {
    ids.iter().map(|i| prog.transition_index(i).unwrap()).collect()
}

fn cfg() -> AnalysisConfig {
    AnalysisConfig::default()
}

#[test]
fn entry_sets_factsum() {
    let p = corpus("factsum");
    let es = entry_sets(&p, &set(&p, &["t1"])).unwrap();
    assert_eq!(ids(&p, &es.direct), vec!["t0"]);
    let es = entry_sets(&p, &set(&p, &["t4", "t5"])).unwrap();
    assert!(es.direct.is_empty());
    assert_eq!(ids(&p, &es.calling), vec!["t1"]);
    assert!(matches!(entry_sets(&p, &set(&p, &["t0", "t1"])), Err(AnalysisError::InitialInSubprogram(_))));
}

#[test]
fn entry_sets_unreachable() {
    let p = parse("(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x) (RULES l0(x) -> l1(x) l5(x) -> l5(x - 1) :|: x > 0)").unwrap();
    assert_eq!(entry_sets(&p, &set(&p, &["t1"])).unwrap(), EntrySets::default());
}

fn factsum_analysis() -> &'static Analysis {
    use std::sync::OnceLock;
    static A: OnceLock<Analysis> = OnceLock::new();
    A.get_or_init(|| analyze(&corpus("factsum"), &cfg()).unwrap())
}

#[test]
fn lifting_examples() {
    let a = factsum_analysis();
    let p = &a.program;
    let st = &a.state;
    let lift = |tp: &[&str], at: &str, local: Bound| {
        let local: BTreeMap<String, Bound> = [(at.to_string(), local)].into();
        lift_runtime(p, &st.rb, &st.sb, &set(p, tp), &local).unwrap().simplify().to_string()
    };
    assert_eq!(lift(&["t1"], "l1", Bound::var("x")), "x");
    assert_eq!(lift(&["t4", "t5"], "f1", Bound::var("a")), "x^2");
    let twn = Bound::sum([Bound::log2(Bound::var("y")), Bound::nat(2)]);
    assert_eq!(lift(&["t3"], "l2", twn), "log2(y + x*x^x) + 2");
}

#[test]
fn factsum_runtime_bounds() {
    let a = factsum_analysis();
    let rb = a.rb_by_id();
    let got: BTreeMap<&str, String> = rb.iter().map(|(k, v)| (k.as_str(), v.to_string())).collect();
    assert_eq!(got["t0"], "1");
    assert_eq!(got["t1"], "x");
    assert_eq!(got["t2"], "1");
    assert_eq!(got["t4"], "x");
    assert_eq!(got["t5"], "x^2");
    assert_eq!(got["t3"], "2*log2(y + x*x^x) + 1");
    assert_eq!(a.class, AsymptoticClass::Poly(2));
    assert_eq!(a.worst_case(), "WORST_CASE(?, O(n^2))");
    let t5 = a.program.transition_index("t5").unwrap();
    assert_eq!(a.state.rb_rule[&t5], Technique::RhoRf);
}

#[test]
fn initial_transitions_have_bound_one() {
    for name in ["factsum", "fac", "nested", "nonterm", "straight"] {
        let p = corpus(name);
        let a = analyze(&p, &cfg()).unwrap();
        for t in p.initial_transitions() {
            assert_eq!(a.state.rb[&t], Bound::one(), "{name}");
        }
    }
}

#[test]
fn nonterminating_loop_is_unbounded() {
    let a = analyze(&corpus("nonterm"), &cfg()).unwrap();
    assert!(a.rb_by_id()["t1"].is_omega());
    assert!(a.overall.is_omega());
    assert_eq!(a.class, AsymptoticClass::Omega);
    assert_eq!(a.blocking().as_deref(), Some("t1"));
    assert_eq!(a.worst_case(), "WORST_CASE(?, ?)");
}

#[test]
fn fac_is_linear() {
    let a = analyze(&corpus("fac"), &cfg()).unwrap();
    assert_eq!(a.overall.to_string(), "a + 2");
    assert_eq!(a.class, AsymptoticClass::Poly(1));
}

#[test]
fn single_transition_is_constant() {
    let p = parse("(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x) (RULES l0(x) -> l1(x))").unwrap();
    let a = analyze(&p, &cfg()).unwrap();
    assert_eq!(a.overall, Bound::one());
    assert_eq!(a.class, AsymptoticClass::Const);
    assert_eq!(overall_rc(&a.state), Bound::one());
}

#[test]
fn nested_loops_are_quadratic() {
    let a = analyze(&corpus("nested"), &cfg()).unwrap();
    assert_eq!(a.class, AsymptoticClass::Poly(2));
}

#[test]
fn termination() {
    assert!(prove_termination(&corpus("factsum"), &cfg()).unwrap());
    assert!(prove_termination(&corpus("fac"), &cfg()).unwrap());
    assert!(!prove_termination(&corpus("nonterm"), &cfg()).unwrap());
    let p = parse("(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x) (RULES l0(x) -> l1(x) l1(x) -> l1(x) :|: x > 0)").unwrap();
    assert!(!prove_termination(&p, &cfg()).unwrap());
}

#[test]
fn reports_are_deterministic() {
    let p = corpus("factsum");
    let a = analyze(&p, &cfg()).unwrap();
    let b = analyze(&p, &cfg()).unwrap();
    assert_eq!(a.report_text(), b.report_text());
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("elapsed_ms");
        v
    };
    assert_eq!(strip(a.report_json()), strip(b.report_json()));
}

#[test]
fn json_report_shape() {
    let v = factsum_analysis().report_json();
    assert_eq!(v["overall"], "2*x + 2*log2(y + x*x^x) + x^2 + 3");
    assert_eq!(v["class"], "O(n^2)");
    assert!(v["elapsed_ms"].is_number());
}

#[test]
fn factsum_runs_within_bounds() {
    let p = corpus("factsum");
    let a = analyze(&p, &cfg()).unwrap();
    let check = CheckConfig { trials: 30, range: 6, ..CheckConfig::default() };
    check_bounds(&p, &a.rb_by_id(), &a.sb_by_id(), &check).unwrap();
}

fn grow(b: &Bound, extra: u64) -> Bound {
    Bound::sum([b.clone(), Bound::prod([Bound::nat(extra), Bound::var("x")])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lifting_is_monotone_in_size_bounds(which in 0usize..24, extra in 1u64..4, sub in 0usize..3) {
        let a = factsum_analysis();
        let p = &a.program;
        let st = &a.state;
        let keys: Vec<_> = st.sb.keys().cloned().collect();
        let key = keys[which % keys.len()].clone();
        let mut bigger = st.sb.clone();
        bigger.insert(key, grow(&st.sb[&keys[which % keys.len()]], extra));
        let (tp, at, local) = [
            (vec!["t1"], "l1", Bound::var("x")),
            (vec!["t4", "t5"], "f1", Bound::var("a")),
            (vec!["t3"], "l2", Bound::sum([Bound::log2(Bound::var("y")), Bound::nat(2)])),
        ][sub].clone();
        let local: BTreeMap<String, Bound> = [(at.to_string(), local)].into();
        let small = lift_runtime(p, &st.rb, &st.sb, &set(p, &tp), &local).unwrap();
        let large = lift_runtime(p, &st.rb, &bigger, &set(p, &tp), &local).unwrap();
        let vars: BTreeSet<String> = p.variables.iter().cloned().collect();
        for s in sample_grid(&vars, &[0, 1, 2, 4]) {
            prop_assert!(small.eval(&s).unwrap() <= large.eval(&s).unwrap());
        }
    }
}

#[test]
fn depth_records_cover_subprograms() {
    let a = factsum_analysis();
    for (t, d) in &a.state.depth {
        assert!(d.subprogram.contains(t));
        assert!(d.bound.is_finite());
    }
    let t5 = a.program.transition_index("t5").unwrap();
    let rec = &a.state.records[a.state.rb_record[&t5]];
    assert!(rec.triple.is_some());
    assert_eq!(rec.local["f1"].to_string(), "a");
}
