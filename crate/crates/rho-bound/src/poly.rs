//! Sparse multivariate polynomials over program variables and call symbols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

/// Indeterminate of a polynomial: a program variable or the result of a function call.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    Var(String),
    Call(String),
}

impl Sym {
    pub fn var(name: &str) -> Sym {
        Sym::Var(name.to_string())
    }

    pub fn call(id: &str) -> Sym {
        Sym::Call(id.to_string())
    }

    pub fn name(&self) -> &str {
        match self {
            Sym::Var(n) | Sym::Call(n) => n,
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Power product; every stored exponent is at least 1.
pub type Monomial = BTreeMap<Sym, u32>;

pub trait Coeff: Clone + Ord + Signed + fmt::Display + fmt::Debug {}
impl<T: Clone + Ord + Signed + fmt::Display + fmt::Debug> Coeff for T {}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly<C> {
    terms: BTreeMap<Monomial, C>,
}

/// Integer polynomial (the ring ℤ[V ∪ F]).
pub type Polynomial = Poly<BigInt>;
/// Rational polynomial used for closed forms and templates.
pub type QPoly = Poly<BigRational>;

impl<C: Coeff> Default for Poly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> Poly<C> {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::new(), c);
        p
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn sym(s: Sym) -> Self {
        let mut m = Monomial::new();
        m.insert(s, 1);
        let mut p = Self::zero();
        p.add_term(m, C::one());
        p
    }

    pub fn var(name: &str) -> Self {
        Self::sym(Sym::var(name))
    }

    pub fn call(id: &str) -> Self {
        Self::sym(Sym::call(id))
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, C)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        let m: Monomial = m.into_iter().filter(|(_, e)| *e > 0).collect();
        let entry = self.terms.entry(m.clone()).or_insert_with(C::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Monomial::new())
    }

    /// Coefficient of the degree-one monomial `s`.
    pub fn linear_coeff(&self, s: &Sym) -> C {
        let mut m = Monomial::new();
        m.insert(s.clone(), 1);
        self.coeff(&m)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_empty())
    }

    pub fn as_constant(&self) -> Option<C> {
        self.is_constant().then(|| self.constant_term())
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.values().sum()).max().unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.degree() <= 1
    }

    pub fn syms(&self) -> BTreeSet<Sym> {
        self.terms.keys().flat_map(|m| m.keys().cloned()).collect()
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.syms()
            .into_iter()
            .filter_map(|s| match s {
                Sym::Var(v) => Some(v),
                Sym::Call(_) => None,
            })
            .collect()
    }

    pub fn calls(&self) -> BTreeSet<String> {
        self.syms()
            .into_iter()
            .filter_map(|s| match s {
                Sym::Call(c) => Some(c),
                Sym::Var(_) => None,
            })
            .collect()
    }

    pub fn has_calls(&self) -> bool {
        self.terms.keys().any(|m| m.keys().any(|s| matches!(s, Sym::Call(_))))
    }

    /// Degree of `s` in the polynomial.
    pub fn degree_in(&self, s: &Sym) -> u32 {
        self.terms.keys().map(|m| m.get(s).copied().unwrap_or(0)).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &C) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, k)| (m.clone(), k.clone() * c.clone())))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..e {
            r = &r * self;
        }
        r
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }

    pub fn rename(&self, f: impl Fn(&Sym) -> Sym) -> Self {
        let mut p = Self::zero();
        for (m, c) in &self.terms {
            let mut nm = Monomial::new();
            for (s, e) in m {
                *nm.entry(f(s)).or_insert(0) += e;
            }
            p.add_term(nm, c.clone());
        }
        p
    }

    /// Simultaneous substitution of indeterminates by polynomials.
    pub fn substitute(&self, map: &BTreeMap<Sym, Poly<C>>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut prod = Self::constant(c.clone());
            for (s, e) in m {
                let base = match map.get(s) {
                    Some(q) => q.clone(),
                    None => Self::sym(s.clone()),
                };
                prod = &prod * &base.pow(*e);
            }
            out = &out + &prod;
        }
        out
    }

    /// Evaluation under a total assignment; `None` if an indeterminate is unbound.
    pub fn eval_with(&self, lookup: impl Fn(&Sym) -> Option<C>) -> Option<C> {
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (s, e) in m {
                let v = lookup(s)?;
                for _ in 0..*e {
                    t = t * v.clone();
                }
            }
            acc = acc + t;
        }
        Some(acc)
    }

    /// Polynomial with every coefficient replaced by its absolute value.
    pub fn abs_coeffs(&self) -> Self {
        self.map_coeffs(|c| c.abs())
    }

    pub fn has_nonnegative_coeffs(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }
}

impl Polynomial {
    pub fn int(n: i64) -> Self {
        Self::constant(BigInt::from(n))
    }

    pub fn to_rational(&self) -> QPoly {
        self.map_coeffs(|c| BigRational::from_integer(c.clone()))
    }

    pub fn eval_map(&self, env: &BTreeMap<Sym, BigInt>) -> Option<BigInt> {
        self.eval_with(|s| env.get(s).cloned())
    }
}

impl QPoly {
    pub fn rat(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    /// Integer polynomial if every coefficient is integral.
    pub fn to_integer(&self) -> Option<Polynomial> {
        if self.terms.values().all(|c| c.is_integer()) {
            Some(self.map_coeffs(|c| c.to_integer()))
        } else {
            None
        }
    }
}

impl<C: Coeff> Add for &Poly<C> {
    type Output = Poly<C>;
    fn add(self, rhs: &Poly<C>) -> Poly<C> {
        let mut p = self.clone();
        for (m, c) in &rhs.terms {
            p.add_term(m.clone(), c.clone());
        }
        p
    }
}

impl<C: Coeff> Sub for &Poly<C> {
    type Output = Poly<C>;
    fn sub(self, rhs: &Poly<C>) -> Poly<C> {
        let mut p = self.clone();
        for (m, c) in &rhs.terms {
            p.add_term(m.clone(), -c.clone());
        }
        p
    }
}

impl<C: Coeff> Mul for &Poly<C> {
    type Output = Poly<C>;
    fn mul(self, rhs: &Poly<C>) -> Poly<C> {
        let mut p = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let mut m = m1.clone();
                for (s, e) in m2 {
                    *m.entry(s.clone()).or_insert(0) += e;
                }
                p.add_term(m, c1.clone() * c2.clone());
            }
        }
        p
    }
}

impl<C: Coeff> Neg for &Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        self.map_coeffs(|c| -c.clone())
    }
}

macro_rules! owned_ops {
    ($tr:ident, $f:ident) => {
        impl<C: Coeff> $tr for Poly<C> {
            type Output = Poly<C>;
            fn $f(self, rhs: Poly<C>) -> Poly<C> {
                (&self).$f(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl<C: Coeff> Neg for Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        -&self
    }
}

impl<C: Coeff> Poly<C> {
    /// Renders with a custom spelling of indeterminates, visited in output order.
    pub fn render(&self, mut sym: impl FnMut(&Sym) -> String) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        // higher degree first, constant last
        let mut ts: Vec<_> = self.terms.iter().collect();
        ts.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.values().sum();
            let db: u32 = b.values().sum();
            db.cmp(&da).then_with(|| a.cmp(b))
        });
        let mut out = String::new();
        for (i, (m, c)) in ts.into_iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            if m.is_empty() {
                out.push_str(&abs.to_string());
                continue;
            }
            if !abs.is_one() {
                out.push_str(&format!("{abs}*"));
            }
            for (j, (s, e)) in m.iter().enumerate() {
                if j > 0 {
                    out.push('*');
                }
                out.push_str(&sym(s));
                if *e > 1 {
                    out.push_str(&format!("^{e}"));
                }
            }
        }
        out
    }
}

impl<C: Coeff> fmt::Display for Poly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(|s| s.name().to_string()))
    }
}
