use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use proptest::prelude::*;
use rho_bound::bounds::{AsymptoticClass, Bound, NatOmega, Valuation};

mod common;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn monotone(b in bound(), s in valuation(), bump in prop::collection::vec(0u64..4, 3)) {
        check_monotone(&b, &s, &bump)?;
    }

    #[test]
    fn simplify_preserves_value(b in bound(), s in valuation()) {
        check_simplify(&b, &s)?;
    }

    #[test]
    fn subst_commutes_with_eval(b in bound(), r in bound(), s in valuation(), which in 0usize..3) {
        check_subst(&b, &r, &s, which)?;
    }

    #[test]
    fn log_rounds_up(k in log_base(), x in 0u64..100_000) {
        check_log(&k, x)?;
    }
}

#[test]
fn eval_examples() {
    let t3 = Bound::sum([
        Bound::log2(Bound::sum([Bound::var("y"), Bound::prod([Bound::var("x"), Bound::pow(Bound::var("x"), Bound::var("x"))])])),
        Bound::nat(2),
    ]);
    let s: Valuation = [("x", 2u64), ("y", 0)].into_iter().map(|(k, v)| (k.to_string(), BigUint::from(v))).collect();
    assert_eq!(t3.eval(&s).unwrap(), NatOmega::from(5u64));
    assert_eq!(t3.to_string(), "log2(y + x*x^x) + 2");
    assert_eq!(Bound::omega().eval(&s).unwrap(), NatOmega::Omega);
    assert_eq!(Bound::log2(Bound::var("y")).eval(&s).unwrap(), NatOmega::zero());
    assert!(Bound::var("w").eval(&s).is_err());
}

#[test]
fn simplify_examples() {
    assert_eq!(Bound::Sum(vec![Bound::zero(), Bound::var("x")]).simplify(), Bound::var("x"));
    let a = Bound::var("a");
    let e = Bound::Prod(vec![a.clone(), Bound::Pow(Box::new(Bound::one()), Box::new(a.clone()))]);
    assert_eq!(e.simplify(), a);
    assert_eq!(Bound::Max(vec![Bound::nat(2), Bound::nat(5)]).simplify(), Bound::nat(5));
    assert_eq!(Bound::prod([Bound::zero(), Bound::omega()]), Bound::zero());
    assert_eq!(Bound::log2(Bound::omega()), Bound::omega());
}

#[test]
fn subst_examples() {
    let x = Bound::var("x");
    let m: BTreeMap<String, Bound> = [("x".to_string(), x.clone())].into();
    assert_eq!(Bound::prod([x.clone(), x.clone()]).subst_simplify(&m).to_string(), "x^2");
    let t3 = Bound::sum([Bound::log2(Bound::var("y")), Bound::nat(2)]);
    assert_eq!(t3.subst(&BTreeMap::new()), t3);
    let sb = Bound::sum([Bound::var("y"), Bound::prod([x.clone(), Bound::pow(x.clone(), x.clone())])]);
    let m: BTreeMap<String, Bound> = [("y".to_string(), sb)].into();
    assert_eq!(t3.subst_simplify(&m).to_string(), "log2(y + x*x^x) + 2");
}

#[test]
fn classification() {
    let x = Bound::var("x");
    let y = Bound::var("y");
    assert_eq!(Bound::prod([x.clone(), x.clone()]).asymptotic_class(), AsymptoticClass::Poly(2));
    assert_eq!(Bound::nat(7).asymptotic_class(), AsymptoticClass::Const);
    assert_eq!(Bound::omega().asymptotic_class(), AsymptoticClass::Omega);
    let xx = Bound::pow(x.clone(), x.clone());
    let t3 = Bound::sum([Bound::log2(Bound::sum([y.clone(), Bound::prod([x.clone(), xx])])), Bound::nat(2)]);
    assert_eq!(t3.asymptotic_class(), AsymptoticClass::PolyLog(1));
    let overall = Bound::sum([t3, Bound::prod([x.clone(), x.clone()]), x.clone(), Bound::nat(3)]);
    assert_eq!(overall.asymptotic_class(), AsymptoticClass::Poly(2));
    assert_eq!(Bound::pow(Bound::nat(2), x).asymptotic_class(), AsymptoticClass::Exp);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn polynomial_classes_grow_polynomially(b in bound()) {
        let b = b.simplify();
        let k = match b.asymptotic_class() {
            AsymptoticClass::Const => 0,
            AsymptoticClass::Log | AsymptoticClass::Poly(1) => 1,
            AsymptoticClass::Poly(k) => k,
            AsymptoticClass::PolyLog(k) => k + 1,
            _ => return Ok(()),
        };
        // value at n = 2^i stays within c·2^((i-1)·k)·(i+1)^4 for a constant c fitted at i = 1
        let at = |n: u64| -> BigUint {
            let s: Valuation = VARS.iter().map(|v| (v.to_string(), BigUint::from(n))).collect();
            b.eval(&s).unwrap().finite().cloned().expect("finite class evaluates finitely")
        };
        let c = at(2) + BigUint::one();
        for i in 1..=6u32 {
            let n = 1u64 << i;
            let cap = &c * BigUint::from(n / 2).pow(k) * BigUint::from(u64::from(i) + 1).pow(4);
            prop_assert!(at(n) <= cap, "{} at {}: class {:?}", b, n, b.asymptotic_class());
        }
    }
}
