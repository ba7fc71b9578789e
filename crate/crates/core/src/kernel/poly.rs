//! Sparse multivariate polynomials over the rationals.
//!
//! Indeterminates are [`Symbol`]s: declared variables plus square-root and
//! logarithm atoms. Monomials are kept in graded lexicographic order with
//! symbols ranked by declaration order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::expr::Expr;
use super::var::Var;

pub type Rational = BigRational;

/// An indeterminate of the polynomial ring.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Symbol {
    Var(Var),
    /// `sqrt(arg)`, obeying `s^2 = arg`.
    Sqrt(Arc<Expr>),
    /// `log(arg)`, algebraically free.
    Log(Arc<Expr>),
}

impl Symbol {
    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Symbol::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_atom(&self) -> bool {
        !matches!(self, Symbol::Var(_))
    }
}

/// A power product of symbols, sorted by symbol.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Monomial {
    degree: u32,
    factors: Vec<(Symbol, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn symbol(s: Symbol, e: u32) -> Self {
        if e == 0 {
            return Monomial::one();
        }
        Monomial {
            degree: e,
            factors: vec![(s, e)],
        }
    }

    pub fn from_factors(mut factors: Vec<(Symbol, u32)>) -> Self {
        factors.retain(|(_, e)| *e > 0);
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Symbol, u32)> = Vec::with_capacity(factors.len());
        for (s, e) in factors {
            match merged.last_mut() {
                Some(last) if last.0 == s => last.1 += e,
                _ => merged.push((s, e)),
            }
        }
        let degree = merged.iter().map(|(_, e)| *e).sum();
        Monomial {
            degree,
            factors: merged,
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn factors(&self) -> &[(Symbol, u32)] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent(&self, s: &Symbol) -> u32 {
        self.factors
            .binary_search_by(|(t, _)| t.cmp(s))
            .map(|i| self.factors[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.factors, &other.factors);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial {
            degree: self.degree + other.degree,
            factors: out,
        }
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.factors.len());
        let mut j = 0;
        let b = &other.factors;
        for (s, e) in &self.factors {
            if j < b.len() && b[j].0 < *s {
                return None;
            }
            if j < b.len() && b[j].0 == *s {
                if b[j].1 > *e {
                    return None;
                }
                if *e > b[j].1 {
                    out.push((s.clone(), e - b[j].1));
                }
                j += 1;
            } else {
                out.push((s.clone(), *e));
            }
        }
        if j < b.len() {
            return None;
        }
        Some(Monomial {
            degree: self.degree - other.degree,
            factors: out,
        })
    }

    /// Removes `s` entirely, returning its exponent and the rest.
    pub fn split_off(&self, s: &Symbol) -> (u32, Monomial) {
        let e = self.exponent(s);
        if e == 0 {
            return (0, self.clone());
        }
        let factors: Vec<_> = self
            .factors
            .iter()
            .filter(|(t, _)| t != s)
            .cloned()
            .collect();
        (
            e,
            Monomial {
                degree: self.degree - e,
                factors,
            },
        )
    }

    fn with_exponent(&self, s: &Symbol, e: u32) -> Monomial {
        let (_, rest) = self.split_off(s);
        rest.mul(&Monomial::symbol(s.clone(), e))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree.cmp(&other.degree) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.factors.iter().zip(other.factors.iter()) {
            if a.0 != b.0 {
                // The monomial holding the higher-priority symbol is larger.
                return if a.0 < b.0 {
                    Ordering::Greater
                } else {
                    Ordering::Less
                };
            }
            match a.1.cmp(&b.1) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.factors.len().cmp(&other.factors.len())
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial as a map from monomial to nonzero coefficient.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn symbol(s: Symbol) -> Self {
        Poly::term(Rational::one(), Monomial::symbol(s, 1))
    }

    pub fn term(c: Rational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, Rational)> {
        self.terms.into_iter()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, s: &Symbol) -> u32 {
        self.terms.keys().map(|m| m.exponent(s)).max().unwrap_or(0)
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (s, _) in m.factors() {
                out.insert(s.clone());
            }
        }
        out
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.terms.keys().any(|m| m.exponent(s) > 0)
    }

    /// A single symbol to the first power, e.g. `x`.
    pub fn as_symbol(&self) -> Option<&Symbol> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if c.is_one() && m.factors().len() == 1 && m.factors()[0].1 == 1 {
            Some(&m.factors()[0].0)
        } else {
            None
        }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &Rational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul_term(&self, k: &Rational, mono: &Monomial) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        // Multiplying by a monomial preserves the order, so the map can be
        // rebuilt from a sorted iterator.
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.mul(mono), c * k))
                .collect(),
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = Poly::zero();
        for (m, c) in &small.terms {
            for (m2, c2) in &big.terms {
                out.add_term(m.mul(m2), c * c2);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Formal partial derivative with respect to a symbol.
    pub fn partial(&self, s: &Symbol) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(s);
            if e == 0 {
                continue;
            }
            out.add_term(
                m.with_exponent(s, e - 1),
                c * Rational::from_integer(BigInt::from(e)),
            );
        }
        out
    }

    /// Exact division; `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (dm, dc) = d.leading().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        // Cheap rejection: a divisor's degree in any symbol bounds ours.
        for (s, _) in dm.factors() {
            if self.degree_in(s) < d.degree_in(s) {
                return None;
            }
        }
        if self.total_degree() < d.total_degree() {
            return None;
        }
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((rm, rc)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let qm = rm.div(&dm)?;
            let qc = &rc / &dc;
            rem = rem.sub(&d.mul_term(&qc, &qm));
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Rational content with the sign of the leading coefficient, and the
    /// primitive integer part with positive leading coefficient.
    pub fn content_primitive(&self) -> (Rational, Poly) {
        if self.is_zero() {
            return (Rational::zero(), Poly::zero());
        }
        let mut den_lcm = BigInt::one();
        let mut num_gcd = BigInt::zero();
        for c in self.terms.values() {
            den_lcm = den_lcm.lcm(c.denom());
            num_gcd = num_gcd.gcd(c.numer());
        }
        let mut content = Rational::new(num_gcd, den_lcm);
        if self.leading().unwrap().1.is_negative() {
            content = -content;
        }
        let prim = self.scale(&content.recip());
        (content, prim)
    }

    /// Greatest monomial dividing every term, and the quotient.
    pub fn monomial_content(&self) -> (Monomial, Poly) {
        let mut iter = self.terms.keys();
        let first = match iter.next() {
            Some(m) => m.clone(),
            None => return (Monomial::one(), Poly::zero()),
        };
        let mut common: Vec<(Symbol, u32)> = first.factors().to_vec();
        for m in iter {
            common = common
                .into_iter()
                .filter_map(|(s, e)| {
                    let f = m.exponent(&s);
                    (f > 0).then(|| (s, e.min(f)))
                })
                .collect();
            if common.is_empty() {
                break;
            }
        }
        let g = Monomial::from_factors(common);
        if g.is_one() {
            return (g, self.clone());
        }
        let rest = Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.div(&g).unwrap(), c.clone()))
                .collect(),
        };
        (g, rest)
    }

    /// View as a univariate polynomial in `s`: index = exponent.
    pub fn to_univariate(&self, s: &Symbol) -> Vec<Poly> {
        let deg = self.degree_in(s) as usize;
        let mut coeffs = vec![Poly::zero(); deg + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(s);
            coeffs[e as usize].add_term(rest, c.clone());
        }
        coeffs
    }

    pub fn from_univariate(coeffs: &[Poly], s: &Symbol) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let xm = Monomial::symbol(s.clone(), e as u32);
            for (m, k) in &c.terms {
                out.add_term(m.mul(&xm), k.clone());
            }
        }
        out
    }

    /// Square root when `self` is a perfect square `g^2`; `g` has positive
    /// leading coefficient.
    pub fn sqrt(&self) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let (lm, lc) = self.leading()?;
        let gc = rational_sqrt(lc)?;
        let mut gm = Vec::new();
        for (s, e) in lm.factors() {
            if e % 2 != 0 {
                return None;
            }
            gm.push((s.clone(), e / 2));
        }
        let lead_m = Monomial::from_factors(gm);
        let mut g = Poly::term(gc.clone(), lead_m.clone());
        let two_lead = Rational::from_integer(BigInt::from(2)) * &gc;
        let max_steps = self.len() + 2;
        for _ in 0..max_steps {
            let rem = self.sub(&g.mul(&g));
            let Some((rm, rc)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) else {
                return Some(g);
            };
            let qm = rm.div(&lead_m)?;
            if qm >= lead_m {
                return None;
            }
            g.add_term(qm, &rc / &two_lead);
        }
        self.sub(&g.mul(&g)).is_zero().then_some(g)
    }

    /// Evaluates with f64 arithmetic, returning `(value, scale)` where scale
    /// is the sum of absolute term values (for relative zero tests).
    pub fn eval_f64(&self, sym: &dyn Fn(&Symbol) -> Option<f64>) -> Option<(f64, f64)> {
        let mut cache: BTreeMap<&Symbol, f64> = BTreeMap::new();
        let mut value = 0.0;
        let mut scale = 0.0;
        for (m, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for (s, e) in m.factors() {
                let x = match cache.get(s) {
                    Some(x) => *x,
                    None => {
                        let x = sym(s)?;
                        cache.insert(s, x);
                        x
                    }
                };
                t *= x.powi(*e as i32);
            }
            value += t;
            scale += t.abs();
        }
        Some((value, scale))
    }
}

pub fn rational_to_f64(c: &Rational) -> f64 {
    match (c.numer().to_f64(), c.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Huge components: scale both down by a common power of two.
            let shift = c.numer().bits().max(c.denom().bits()).saturating_sub(1000);
            let n = (c.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (c.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// Exact square root of a nonnegative rational, if it is a square.
pub fn rational_sqrt(c: &Rational) -> Option<Rational> {
    if c.is_negative() {
        return None;
    }
    let n = c.numer().sqrt();
    let d = c.denom().sqrt();
    (&n * &n == *c.numer() && &d * &d == *c.denom()).then(|| Rational::new(n, d))
}

/// Splits a positive rational `c` as `k^2 * m` with `m` a square-free
/// integer ratio representative; returns `(k, m)` using trial division on
/// small primes and an exact-square check on the cofactor.
pub fn rational_square_part(c: &Rational) -> (Rational, Rational) {
    let (kn, mn) = integer_square_part(c.numer());
    let (kd, md) = integer_square_part(c.denom());
    // c = kn^2 mn / (kd^2 md) = (kn/(kd md))^2 * (mn md)
    let k = Rational::new(kn, kd * &md);
    let m = Rational::from_integer(mn * md);
    (k, m)
}

fn integer_square_part(n: &BigInt) -> (BigInt, BigInt) {
    let sign = if n.is_negative() {
        -BigInt::one()
    } else {
        BigInt::one()
    };
    let mut rest = n.abs();
    let mut k = BigInt::one();
    let r = rest.sqrt();
    if &r * &r == rest {
        return (r, sign);
    }
    let mut p = BigInt::from(2);
    let limit = BigInt::from(1000);
    while p < limit {
        let p2 = &p * &p;
        while (&rest % &p2).is_zero() {
            rest /= &p2;
            k *= &p;
        }
        p += 1;
    }
    let r = rest.sqrt();
    if &r * &r == rest {
        return (k * r, sign);
    }
    (k, rest * sign)
}

/// Greatest common divisor over the rationals, normalized to a primitive
/// polynomial with positive leading coefficient. Square-root atoms are
/// treated as free symbols.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.content_primitive().1;
    }
    if b.is_zero() {
        return a.content_primitive().1;
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if let Some(q) = a.div_exact(b) {
        let _ = q;
        return b.content_primitive().1;
    }
    if let Some(q) = b.div_exact(a) {
        let _ = q;
        return a.content_primitive().1;
    }
    let sa = a.symbols();
    let sb = b.symbols();
    // Symbols absent from one side can only enter through content.
    if let Some(x) = sa.symmetric_difference(&sb).next().cloned() {
        let (p, q) = if sa.contains(&x) { (a, b) } else { (b, a) };
        let cont = univariate_content(&p.to_univariate(&x));
        return gcd(&cont, q);
    }
    let x = sa.iter().next().cloned().unwrap();
    let ua = a.to_univariate(&x);
    let ub = b.to_univariate(&x);
    let ca = univariate_content(&ua);
    let cb = univariate_content(&ub);
    let gc = gcd(&ca, &cb);
    let mut pa = primitive_part(&ua, &ca);
    let mut pb = primitive_part(&ub, &cb);
    if pa.len() < pb.len() {
        std::mem::swap(&mut pa, &mut pb);
    }
    while pb.len() > 1 {
        let r = pseudo_remainder(&pa, &pb);
        pa = pb;
        if r.iter().all(|c| c.is_zero()) {
            pb = vec![Poly::zero()];
            break;
        }
        let cr = univariate_content(&r);
        pb = primitive_part(&r, &cr);
    }
    let g = if pb.len() == 1 && !pb[0].is_zero() {
        // Remainder sequence reached a nonzero constant in x.
        Poly::one()
    } else {
        let cpa = univariate_content(&pa);
        Poly::from_univariate(&primitive_part(&pa, &cpa), &x)
    };
    g.mul(&gc).content_primitive().1
}

fn trim(mut v: Vec<Poly>) -> Vec<Poly> {
    while v.len() > 1 && v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
    v
}

fn univariate_content(coeffs: &[Poly]) -> Poly {
    let mut g = Poly::zero();
    for c in coeffs {
        if c.is_zero() {
            continue;
        }
        g = if g.is_zero() {
            c.content_primitive().1
        } else {
            gcd(&g, c)
        };
        if g.is_constant() {
            return Poly::one();
        }
    }
    if g.is_zero() {
        Poly::one()
    } else {
        g
    }
}

fn primitive_part(coeffs: &[Poly], content: &Poly) -> Vec<Poly> {
    trim(
        coeffs
            .iter()
            .map(|c| c.div_exact(content).expect("content divides coefficients"))
            .collect(),
    )
}

fn pseudo_remainder(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    let mut r: Vec<Poly> = trim(a.to_vec());
    let b = trim(b.to_vec());
    let db = b.len() - 1;
    let lb = b[db].clone();
    while r.len() > db && !(r.len() == 1 && r[0].is_zero()) {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - db;
        let mut next: Vec<Poly> = r.iter().map(|c| c.mul(&lb)).collect();
        for (i, bc) in b.iter().enumerate() {
            next[i + shift] = next[i + shift].sub(&bc.mul(&lr));
        }
        next.pop();
        r = trim(next);
        if r.is_empty() {
            r.push(Poly::zero());
        }
    }
    r
}
