//! Generators shared by the bound-algebra property tests.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use rho_bound::bounds::{Bound, NatOmega, Valuation};

pub const VARS: [&str; 3] = ["x", "y", "z"];

fn leaf() -> impl Strategy<Value = Bound> {
    prop_oneof![
        4 => (0u64..6).prop_map(|n| Bound::Const(NatOmega::from(n))),
        6 => prop::sample::select(&VARS[..]).prop_map(|v| Bound::Var(v.to_string())),
        1 => Just(Bound::Const(NatOmega::Omega)),
    ]
}

pub fn log_base() -> impl Strategy<Value = BigRational> {
    prop_oneof![
        Just(BigRational::from_integer(BigInt::from(2))),
        Just(BigRational::from_integer(BigInt::from(3))),
        Just(BigRational::new(BigInt::from(3), BigInt::from(2))),
    ]
}

/// Raw trees: constructors are used directly, so `simplify` has work to do.
pub fn bound() -> impl Strategy<Value = Bound> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Bound::Sum),
            prop::collection::vec(inner.clone(), 1..4).prop_map(Bound::Prod),
            prop::collection::vec(inner.clone(), 1..4).prop_map(Bound::Max),
            (inner.clone(), leaf()).prop_map(|(b, e)| Bound::Pow(Box::new(b), Box::new(e))),
            (log_base(), inner).prop_map(|(k, b)| Bound::Log(k, Box::new(b))),
        ]
    })
}

pub fn valuation() -> impl Strategy<Value = Valuation> {
    prop::collection::vec(0u64..7, 3)
        .prop_map(|xs| VARS.iter().zip(xs).map(|(v, x)| (v.to_string(), BigUint::from(x))).collect())
}

/// `⌈log_k(max(1, x))⌉` by repeated multiplication.
pub fn ceil_log_oracle(k: &BigRational, x: &BigUint) -> u64 {
    let x = BigRational::from_integer(BigInt::from(x.clone()));
    let mut p = BigRational::one();
    let mut n = 0;
    while p < x {
        p *= k;
        n += 1;
    }
    n
}

pub fn check_monotone(b: &Bound, s: &Valuation, bump: &[u64]) -> Result<(), TestCaseError> {
    let bigger: Valuation = s.iter().zip(bump).map(|((k, v), d)| (k.clone(), v + d)).collect();
    prop_assert!(b.eval(s).unwrap() <= b.eval(&bigger).unwrap(), "{:?}", b);
    Ok(())
}

pub fn check_simplify(b: &Bound, s: &Valuation) -> Result<(), TestCaseError> {
    let simple = b.simplify();
    prop_assert_eq!(simple.eval(s).unwrap(), b.eval(s).unwrap(), "{:?} ~> {}", b, simple);
    prop_assert_eq!(simple.simplify(), simple.clone());
    Ok(())
}

pub fn check_subst(b: &Bound, r: &Bound, s: &Valuation, which: usize) -> Result<(), TestCaseError> {
    let v = VARS[which].to_string();
    let m: std::collections::BTreeMap<String, Bound> = [(v.clone(), r.clone())].into();
    match r.eval(s).unwrap() {
        NatOmega::Fin(n) => {
            let mut s2 = s.clone();
            s2.insert(v, n);
            prop_assert_eq!(b.subst(&m).eval(s).unwrap(), b.eval(&s2).unwrap());
            prop_assert_eq!(b.subst_simplify(&m).eval(s).unwrap(), b.eval(&s2).unwrap());
        }
        NatOmega::Omega => {
            // ω has no valuation counterpart; substituting it can only increase
            let big: Valuation = s.iter().map(|(k, x)| (k.clone(), if *k == v { x + 64u32 } else { x.clone() })).collect();
            prop_assert!(b.subst(&m).eval(s).unwrap() >= b.eval(&big).unwrap());
        }
    }
    Ok(())
}

pub fn check_log(k: &BigRational, x: u64) -> Result<(), TestCaseError> {
    let b = Bound::Log(k.clone(), Box::new(Bound::Var("x".into())));
    let s: Valuation = [("x".to_string(), BigUint::from(x))].into();
    prop_assert_eq!(b.eval(&s).unwrap(), NatOmega::from(ceil_log_oracle(k, &BigUint::from(x))));
    Ok(())
}
