//! Exact rational simplex (two phases, Bland's rule) and integer branch-and-bound.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `Σ coeffs[i]·x_i + constant`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub coeffs: BTreeMap<usize, Q>,
    pub constant: Q,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr { coeffs: BTreeMap::new(), constant: Q::zero() }
    }

    pub fn constant(c: Q) -> Self {
        LinExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        let mut e = Self::zero();
        e.add_term(i, Q::one());
        e
    }

    pub fn add_term(&mut self, i: usize, c: Q) {
        if c.is_zero() {
            return;
        }
        let e = self.coeffs.entry(i).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&i);
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, k: &Q) {
        for (i, c) in &other.coeffs {
            self.add_term(*i, c * k);
        }
        self.constant += &other.constant * k;
    }

    pub fn scaled(&self, k: &Q) -> LinExpr {
        let mut e = LinExpr::zero();
        e.add_scaled(self, k);
        e
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        let mut acc = self.constant.clone();
        for (i, c) in &self.coeffs {
            acc += c * &x[*i];
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

/// `expr rel 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinCons {
    pub expr: LinExpr,
    pub rel: Rel,
}

impl LinCons {
    pub fn le0(expr: LinExpr) -> Self {
        LinCons { expr, rel: Rel::Le }
    }

    pub fn ge0(expr: LinExpr) -> Self {
        LinCons { expr, rel: Rel::Ge }
    }

    pub fn eq0(expr: LinExpr) -> Self {
        LinCons { expr, rel: Rel::Eq }
    }

    pub fn holds(&self, x: &[Q]) -> bool {
        let v = self.expr.eval(x);
        match self.rel {
            Rel::Le => !v.is_positive(),
            Rel::Eq => v.is_zero(),
            Rel::Ge => !v.is_negative(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Lp {
    pub num_vars: usize,
    /// Variables constrained to be nonnegative; the rest are free.
    pub nonneg: Vec<bool>,
    pub cons: Vec<LinCons>,
}

impl Lp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_var(&mut self, nonneg: bool) -> usize {
        self.num_vars += 1;
        self.nonneg.push(nonneg);
        self.num_vars - 1
    }

    pub fn push(&mut self, c: LinCons) {
        self.cons.push(c);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Infeasible,
    Unbounded,
    Optimal(Vec<Q>),
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [Q]) {
        let p = self.rows[r][c].clone();
        let inv = Q::one() / p;
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let nz: Vec<usize> = (0..=self.ncols).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let prow = self.rows[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &nz {
                let d = &f * &prow[j];
                self.rows[i][j] -= d;
            }
        }
        let f = obj[c].clone();
        if !f.is_zero() {
            for &j in &nz {
                let d = &f * &prow[j];
                obj[j] -= d;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes the objective row (reduced costs with `obj[ncols]` = -value).
    fn optimize(&mut self, obj: &mut [Q], allowed: &[bool]) -> bool {
        loop {
            let Some(c) = (0..self.ncols).find(|&j| allowed[j] && obj[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(Q, usize)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if a.is_positive() {
                    let ratio = &self.rows[i][self.ncols] / a;
                    let better = match &best {
                        None => true,
                        Some((r, bi)) => {
                            ratio < *r || (ratio == *r && self.basis[i] < self.basis[*bi])
                        }
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            match best {
                None => return false,
                Some((_, r)) => self.pivot(r, c, obj),
            }
        }
    }
}

/// Minimizes `obj` subject to the constraints; with `None` returns any feasible vertex.
pub fn solve(lp: &Lp, obj: Option<&LinExpr>) -> LpOutcome {
    // column layout: one column per nonneg var, two per free var, then slacks, then artificials
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::new();
    let mut ncols = 0;
    for i in 0..lp.num_vars {
        if lp.nonneg[i] {
            col_of.push((ncols, None));
            ncols += 1;
        } else {
            col_of.push((ncols, Some(ncols + 1)));
            ncols += 2;
        }
    }
    let nstruct = ncols;
    // normalize rows: a·y rel b with b ≥ 0
    let mut rows_spec: Vec<(BTreeMap<usize, Q>, Rel, Q)> = Vec::new();
    for c in &lp.cons {
        let mut a: BTreeMap<usize, Q> = BTreeMap::new();
        for (i, k) in &c.expr.coeffs {
            let (p, n) = col_of[*i];
            *a.entry(p).or_insert_with(Q::zero) += k;
            if let Some(n) = n {
                *a.entry(n).or_insert_with(Q::zero) -= k;
            }
        }
        a.retain(|_, v| !v.is_zero());
        let mut b = -c.expr.constant.clone();
        let mut rel = c.rel;
        if a.is_empty() {
            let ok = match rel {
                Rel::Le => !b.is_negative(),
                Rel::Eq => b.is_zero(),
                Rel::Ge => !b.is_positive(),
            };
            if !ok {
                return LpOutcome::Infeasible;
            }
            continue;
        }
        if b.is_negative() {
            b = -b;
            for v in a.values_mut() {
                *v = -v.clone();
            }
            rel = match rel {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
        }
        rows_spec.push((a, rel, b));
    }
    let m = rows_spec.len();
    let nslack = rows_spec.iter().filter(|r| r.1 != Rel::Eq).count();
    let nart = rows_spec.iter().filter(|r| r.1 != Rel::Le).count();
    let total = nstruct + nslack + nart;
    let mut t = Tableau { rows: vec![vec![Q::zero(); total + 1]; m], basis: vec![0; m], ncols: total };
    let mut s = nstruct;
    let mut a_idx = nstruct + nslack;
    let mut is_art = vec![false; total];
    for (i, (a, rel, b)) in rows_spec.into_iter().enumerate() {
        for (j, v) in a {
            t.rows[i][j] = v;
        }
        t.rows[i][total] = b;
        match rel {
            Rel::Le => {
                t.rows[i][s] = Q::one();
                t.basis[i] = s;
                s += 1;
            }
            Rel::Ge => {
                t.rows[i][s] = -Q::one();
                s += 1;
                t.rows[i][a_idx] = Q::one();
                t.basis[i] = a_idx;
                is_art[a_idx] = true;
                a_idx += 1;
            }
            Rel::Eq => {
                t.rows[i][a_idx] = Q::one();
                t.basis[i] = a_idx;
                is_art[a_idx] = true;
                a_idx += 1;
            }
        }
    }
    // phase 1
    if nart > 0 {
        let mut obj1 = vec![Q::zero(); total + 1];
        for j in 0..total {
            if is_art[j] {
                obj1[j] = Q::one();
            }
        }
        for i in 0..m {
            if is_art[t.basis[i]] {
                for j in 0..=total {
                    let d = t.rows[i][j].clone();
                    if !d.is_zero() {
                        obj1[j] -= d;
                    }
                }
            }
        }
        let allowed = vec![true; total];
        t.optimize(&mut obj1, &allowed);
        if obj1[total].is_negative() {
            return LpOutcome::Infeasible;
        }
        // drive artificials out of the basis
        let mut i = 0;
        while i < t.rows.len() {
            if is_art[t.basis[i]] {
                match (0..total).find(|&j| !is_art[j] && !t.rows[i][j].is_zero()) {
                    Some(c) => {
                        let mut dummy = vec![Q::zero(); total + 1];
                        t.pivot(i, c, &mut dummy);
                    }
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    let allowed: Vec<bool> = (0..total).map(|j| !is_art[j]).collect();
    if let Some(o) = obj {
        let mut cost = vec![Q::zero(); total + 1];
        for (i, k) in &o.coeffs {
            let (p, n) = col_of[*i];
            cost[p] += k;
            if let Some(n) = n {
                cost[n] -= k;
            }
        }
        for i in 0..t.rows.len() {
            let cb = cost[t.basis[i]].clone();
            if !cb.is_zero() {
                for j in 0..=total {
                    let d = &cb * &t.rows[i][j];
                    if !d.is_zero() {
                        cost[j] -= d;
                    }
                }
            }
        }
        if !t.optimize(&mut cost, &allowed) {
            return LpOutcome::Unbounded;
        }
    }
    let mut y = vec![Q::zero(); total];
    for (i, &b) in t.basis.iter().enumerate() {
        y[b] = t.rows[i][total].clone();
    }
    let x: Vec<Q> = col_of
        .iter()
        .map(|(p, n)| match n {
            Some(n) => &y[*p] - &y[*n],
            None => y[*p].clone(),
        })
        .collect();
    debug_assert!(lp.cons.iter().all(|c| c.holds(&x)));
    LpOutcome::Optimal(x)
}

/// Minimizes a sequence of objectives lexicographically.
pub fn solve_lex(lp: &Lp, objs: &[LinExpr]) -> LpOutcome {
    let mut cur = lp.clone();
    let mut last = solve(&cur, None);
    for o in objs {
        match solve(&cur, Some(o)) {
            LpOutcome::Optimal(x) => {
                let v = o.eval(&x);
                let mut fix = o.clone();
                fix.constant -= v;
                cur.push(LinCons::le0(fix));
                last = LpOutcome::Optimal(x);
            }
            other => return other,
        }
    }
    last
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IntOutcome {
    Infeasible,
    Feasible(Vec<Q>),
    Unknown,
}

/// Searches for a point with integral values on `int_vars`.
pub fn solve_int(lp: &Lp, int_vars: &[usize], node_limit: usize) -> IntOutcome {
    let mut stack = vec![lp.clone()];
    let mut nodes = 0;
    let mut exhausted = true;
    while let Some(cur) = stack.pop() {
        nodes += 1;
        if nodes > node_limit {
            exhausted = false;
            break;
        }
        let x = match solve(&cur, None) {
            LpOutcome::Optimal(x) => x,
            _ => continue,
        };
        match int_vars.iter().find(|&&i| !x[i].is_integer()) {
            None => return IntOutcome::Feasible(x),
            Some(&i) => {
                let fl = x[i].floor();
                let mut lo = cur.clone();
                let mut e = LinExpr::var(i);
                e.constant = -fl.clone();
                lo.push(LinCons::le0(e));
                let mut hi = cur;
                let mut e = LinExpr::var(i);
                e.constant = -(fl + Q::one());
                hi.push(LinCons::ge0(e));
                stack.push(hi);
                stack.push(lo);
            }
        }
    }
    if exhausted {
        IntOutcome::Infeasible
    } else {
        IntOutcome::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_optimum() {
        // min -x - y s.t. x + 2y ≤ 4, 3x + y ≤ 6, x,y ≥ 0
        let mut lp = Lp::new();
        let x = lp.new_var(true);
        let y = lp.new_var(true);
        let mut e = LinExpr::constant(q(-4));
        e.add_term(x, q(1));
        e.add_term(y, q(2));
        lp.push(LinCons::le0(e));
        let mut e = LinExpr::constant(q(-6));
        e.add_term(x, q(3));
        e.add_term(y, q(1));
        lp.push(LinCons::le0(e));
        let mut o = LinExpr::zero();
        o.add_term(x, q(-1));
        o.add_term(y, q(-1));
        match solve(&lp, Some(&o)) {
            LpOutcome::Optimal(v) => assert_eq!(o.eval(&v), Q::new((-14).into(), 5.into())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new();
        let x = lp.new_var(false);
        let mut e = LinExpr::var(x);
        e.constant = q(-1);
        lp.push(LinCons::ge0(e.clone()));
        lp.push(LinCons::le0(LinExpr::var(x)));
        assert_eq!(solve(&lp, None), LpOutcome::Infeasible);
        let mut lp = Lp::new();
        let x = lp.new_var(false);
        lp.push(LinCons::ge0(LinExpr::var(x)));
        assert_eq!(solve(&lp, Some(&LinExpr::var(x).scaled(&q(-1)))), LpOutcome::Unbounded);
    }

    #[test]
    fn integer_gap() {
        // 2x = 1 has no integer solution
        let mut lp = Lp::new();
        let x = lp.new_var(false);
        let mut e = LinExpr::var(x).scaled(&q(2));
        e.constant = q(-1);
        lp.push(LinCons::eq0(e));
        assert_eq!(solve_int(&lp, &[x], 100), IntOutcome::Infeasible);
    }
}
