use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rho_bound::bounds::NatOmega;
use rho_bound::interp::abs_valuation;
use rho_bound::its::{state_env, Constraint, Program, State, Transition};
use rho_bound::parser::parse;
use rho_bound::poly::{Polynomial, Sym};
use rho_bound::smt::SmtConfig;
use rho_bound::twn::*;

fn corpus(name: &str) -> Program {
    let path = format!("{}/corpus/{name}.koat", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn race() -> TwnLoop {
    let p = corpus("race");
    as_twn(&p.transitions[1]).unwrap()
}

fn single(rule: &str) -> TwnLoop {
    let p = parse(&format!("(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x) (RULES l0(x) -> l1(x) {rule})")).unwrap();
    as_twn(&p.transitions[1]).unwrap()
}

fn iterate_update(lp: &TwnLoop, s: &State, n: usize) -> State {
    let mut s = s.clone();
    for _ in 0..n {
        let env = state_env(&s);
        s = lp.update.iter().map(|(v, p)| (v.clone(), p.eval_map(&env).unwrap())).collect();
    }
    s
}

fn check_closed_forms(lp: &TwnLoop, s: &State, upto: usize) {
    let cf = closed_form(lp).unwrap();
    let x: BTreeMap<Sym, BigRational> = s.iter().map(|(k, v)| (Sym::Var(k.clone()), BigRational::from_integer(v.clone()))).collect();
    for n in 0..=upto {
        let it = iterate_update(lp, s, n);
        for (v, pe) in &cf {
            assert_eq!(pe.eval(n as u64, &x).unwrap(), BigRational::from_integer(it[v].clone()), "{v} after {n}: {pe}");
        }
    }
}

#[test]
fn race_closed_forms() {
    let lp = race();
    let cf = closed_form(&lp).unwrap();
    assert_eq!(cf["x1"].to_string(), "x1*3^n");
    assert_eq!(cf["x2"].to_string(), "x2*2^n");
    for (a, b) in [(1, 16), (-3, 5), (7, 0)] {
        let s: State = [("x1".to_string(), BigInt::from(a)), ("x2".to_string(), BigInt::from(b))].into();
        check_closed_forms(&lp, &s, 20);
    }
}

#[test]
fn race_guard_expressions() {
    let lp = race();
    let cf = closed_form(&lp).unwrap();
    let pes: Vec<String> = guard_polyexp(&lp, &cf).iter().map(|(_, pe)| pe.to_string()).collect();
    assert_eq!(pes, vec!["x2*2^n + -x1*3^n".to_string(), "x1*3^n".to_string()]);
}

#[test]
fn identity_and_increment() {
    let id = single("l1(x) -> l1(x) :|: x > 0");
    assert_eq!(closed_form(&id).unwrap()["x"].to_string(), "x");
    assert_ne!(twn_terminates(&id, &SmtConfig::internal()).unwrap(), Termination::Yes);
    let inc = single("l1(x) -> l1(x+1)");
    let s: State = [("x".to_string(), BigInt::from(-4))].into();
    check_closed_forms(&inc, &s, 20);
    let dec = single("l1(x) -> l1(x-1) :|: x > 0");
    assert_eq!(twn_terminates(&dec, &SmtConfig::internal()).unwrap(), Termination::Yes);
    let b = twn_poly_bound(&dec, &SmtConfig::internal()).unwrap().unwrap();
    assert_eq!(b.to_string(), "2*x + 1");
    let always = single("l1(x) -> l1(x) :|: 0 < 1");
    assert_eq!(twn_poly_bound(&always, &SmtConfig::internal()).unwrap(), None);
}

#[test]
fn race_bounds() {
    let lp = race();
    let cfg = SmtConfig::internal();
    assert_eq!(twn_terminates(&lp, &cfg).unwrap(), Termination::Yes);
    let poly = twn_poly_bound(&lp, &cfg).unwrap().unwrap();
    assert_eq!(poly.to_string(), "2*x2 + 1");
    let log = twn_log_bound(&lp, &cfg).unwrap().unwrap();
    assert_eq!(log.to_string(), "2*log2(x2) + 1");
    // the loop runs 7 times from (1, 16)
    let s: State = [("x1".to_string(), BigInt::from(1)), ("x2".to_string(), BigInt::from(16))].into();
    assert_eq!(iterate(&lp, &s, 100), Some(7));
    assert!(validate_bound(&lp, &log, 64, 500, 1));
    assert!(validate_bound(&lp, &poly, 64, 500, 2));
}

#[test]
fn shared_base_has_no_log_bound() {
    let p = parse("(STARTTERM (FUNCTIONSYMBOLS l0)) (VAR x y) (RULES l0(x,y) -> l1(x,y) l1(x,y) -> l1(2*x, 2*y) :|: x < y && x > 0)").unwrap();
    let lp = as_twn(&p.transitions[1]).unwrap();
    assert_eq!(twn_log_bound(&lp, &SmtConfig::internal()).unwrap(), None);
}

fn random_poly(vars: &[String], coeffs: &[i64]) -> Polynomial {
    // coefficients for 1, v, v^2 over each earlier variable
    let mut p = Polynomial::int(coeffs[0]);
    for (i, v) in vars.iter().enumerate() {
        p = &p + &Polynomial::var(v).scale(&BigInt::from(coeffs[1 + 2 * i]));
        p = &p + &Polynomial::var(v).pow(2).scale(&BigInt::from(coeffs[2 + 2 * i]));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_forms_match_iteration(
        nvars in 1usize..=3,
        a in prop::collection::vec(-3i64..=3, 3),
        c in prop::collection::vec(-3i64..=3, 21),
        init in prop::collection::vec(-5i64..=5, 3),
    ) {
        let names: Vec<String> = (1..=nvars).map(|i| format!("x{i}")).collect();
        let mut eta = BTreeMap::new();
        for i in 0..nvars {
            let own = Polynomial::var(&names[i]).scale(&BigInt::from(a[i]));
            let rest = random_poly(&names[..i], &c[7 * i..7 * i + 7]);
            eta.insert(names[i].clone(), &own + &rest);
        }
        let t = Transition { id: "t".into(), source: "l".into(), target: "l".into(), guard: Constraint::default(), eta };
        let lp = as_twn(&t).unwrap();
        let s: State = names.iter().zip(&init).map(|(v, x)| (v.clone(), BigInt::from(*x))).collect();
        // nilpotent chains feeding a zero coefficient have no closed form here
        let Some(cf) = closed_form(&lp) else {
            prop_assert!(a[..nvars].contains(&0));
            return Ok(());
        };
        check_closed_forms(&lp, &s, 20);
        for pe in cf.values() {
            let keys: Vec<_> = pe.summands.keys().cloned().collect();
            let mut sorted = keys.clone();
            sorted.sort();
            prop_assert_eq!(keys, sorted);
        }
    }

    #[test]
    fn produced_bounds_are_sound(x1 in -64i64..=64, x2 in -64i64..=64, which in 0usize..3) {
        let lp = match which {
            0 => race(),
            1 => single("l1(x) -> l1(x-1) :|: x > 0"),
            _ => as_twn(&corpus("doubling").transitions[1]).unwrap(),
        };
        let cfg = SmtConfig::internal();
        let vars: Vec<String> = lp.update.keys().cloned().collect();
        let s: State = vars.iter().zip([x1, x2]).map(|(v, x)| (v.clone(), BigInt::from(x))).collect();
        for b in [twn_poly_bound(&lp, &cfg).unwrap(), twn_log_bound(&lp, &cfg).unwrap()].into_iter().flatten() {
            let NatOmega::Fin(v) = b.eval(&abs_valuation(&s)).unwrap() else { continue };
            let n = iterate(&lp, &s, 10_000).unwrap();
            prop_assert!(num_bigint::BigUint::from(n) <= v, "{} iterations > {} = {}", n, b, v);
        }
    }
}

#[test]
fn guard_atom_one_is_constant() {
    let lp = single("l1(x) -> l1(x) :|: 0 < 1");
    let cf = closed_form(&lp).unwrap();
    assert_eq!(guard_polyexp(&lp, &cf)[0].1.to_string(), "1");
}
