//! Canonical rational expressions.
//!
//! An [`Expr`] is a numerator polynomial over a product of normalized
//! denominator factors. Square-root atoms are reduced by `s^2 -> arg` and
//! never survive in a denominator; common factors are cancelled. Any two
//! equal values built the same way render identically.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::poly::{gcd, rational_square_part, Monomial, Poly, Rational, Symbol};
use super::var::Var;
use super::workspace::Assumptions;

/// Above this many terms the gcd pass for nonlinear denominator factors is
/// skipped; exact-division cancellation still runs.
const GCD_TERM_CAP: usize = 400;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Expr {
    num: Poly,
    den: BTreeMap<Poly, u32>,
}

pub type DenMap = BTreeMap<Poly, u32>;

fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn has_sqrt(p: &Poly) -> bool {
    p.symbols().iter().any(|s| matches!(s, Symbol::Sqrt(_)))
}

fn first_sqrt(p: &Poly) -> Option<Symbol> {
    p.symbols()
        .into_iter()
        .find(|s| matches!(s, Symbol::Sqrt(_)))
}

fn den_product(den: &DenMap) -> Poly {
    let mut p = Poly::one();
    for (f, e) in den {
        p = p.mul(&f.pow(*e));
    }
    p
}

/// Inserts `f^e` into a denominator, keeping factors normalized and
/// refining against existing factors by exact division.
fn insert_factor(scalar: &mut Rational, den: &mut DenMap, f: Poly, e: u32) {
    if e == 0 {
        return;
    }
    let (c, prim) = f.content_primitive();
    if c.is_zero() {
        panic!("division by zero polynomial");
    }
    *scalar /= pow_rat(&c, e);
    if prim.is_constant() {
        return;
    }
    let (mono, rest) = prim.monomial_content();
    for (s, k) in mono.factors() {
        *den.entry(Poly::symbol(s.clone())).or_insert(0) += k * e;
    }
    if rest.is_constant() {
        return;
    }
    let mut f = rest;
    if has_sqrt(&f) {
        *den.entry(f).or_insert(0) += e;
        return;
    }
    if f.total_degree() > 1 && f.len() <= GCD_TERM_CAP {
        // square-free split: a repeated factor divides every partial derivative
        if let Some(s) = f
            .symbols()
            .into_iter()
            .find(|s| matches!(s, Symbol::Var(_)))
        {
            let g = gcd(&f, &f.partial(&s));
            if !g.is_constant() {
                let rest = f.div_exact(&g).unwrap();
                insert_factor(scalar, den, g, e);
                insert_factor(scalar, den, rest, e);
                return;
            }
        }
    }
    let keys: Vec<Poly> = den.keys().cloned().collect();
    for g in keys {
        if has_sqrt(&g) || g.as_symbol().is_some() {
            continue;
        }
        if g == f {
            *den.get_mut(&g).unwrap() += e;
            return;
        }
        while let Some(q) = f.div_exact(&g) {
            *den.get_mut(&g).unwrap() += e;
            let (qc, qp) = q.content_primitive();
            *scalar /= pow_rat(&qc, e);
            f = qp;
            if f.is_constant() {
                return;
            }
        }
        if let Some(q) = g.div_exact(&f) {
            let eg = den.remove(&g).unwrap();
            let (qc, qp) = q.content_primitive();
            *scalar /= pow_rat(&qc, eg);
            *den.entry(f.clone()).or_insert(0) += eg;
            insert_factor(scalar, den, qp, eg);
            *den.get_mut(&f).unwrap() += e;
            return;
        }
        if g.total_degree() > 1 && f.total_degree() > 1 {
            let h = gcd(&f, &g);
            if !h.is_constant() {
                let eg = den.remove(&g).unwrap();
                let g_rest = g.div_exact(&h).unwrap();
                let f_rest = f.div_exact(&h).unwrap();
                insert_factor(scalar, den, h.clone(), eg + e);
                insert_factor(scalar, den, g_rest, eg);
                insert_factor(scalar, den, f_rest, e);
                return;
            }
        }
    }
    *den.entry(f).or_insert(0) += e;
}

fn pow_rat(c: &Rational, e: u32) -> Rational {
    let mut out = Rational::one();
    for _ in 0..e {
        out *= c;
    }
    out
}

impl Expr {
    pub fn zero() -> Self {
        Expr {
            num: Poly::zero(),
            den: DenMap::new(),
        }
    }

    pub fn one() -> Self {
        Expr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Expr {
            num: Poly::constant(c),
            den: DenMap::new(),
        }
    }

    pub fn int(n: i64) -> Self {
        Expr::constant(rat(n))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Expr::constant(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn var(v: &Var) -> Self {
        Expr {
            num: Poly::symbol(Symbol::Var(v.clone())),
            den: DenMap::new(),
        }
    }

    pub fn symbol(s: Symbol) -> Self {
        Expr {
            num: Poly::symbol(s),
            den: DenMap::new(),
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        Expr::from_parts(p, DenMap::new())
    }

    /// Builds `num / den` from arbitrary parts and canonicalizes.
    pub fn from_num_den(num: Poly, den: Poly) -> Self {
        let mut scalar = Rational::one();
        let mut d = DenMap::new();
        insert_factor(&mut scalar, &mut d, den, 1);
        Expr::from_parts(num.scale(&scalar), d)
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn den_factors(&self) -> &DenMap {
        &self.den
    }

    pub fn denom_poly(&self) -> Poly {
        den_product(&self.den)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_empty() && self.num.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<Rational> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        if !self.den.is_empty() {
            return None;
        }
        self.num.as_symbol().and_then(|s| s.as_var())
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_empty()
    }

    /// Symbols of numerator and denominator (not looking inside atoms).
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = self.num.symbols();
        for f in self.den.keys() {
            out.extend(f.symbols());
        }
        out
    }

    /// All variables, including those inside atom arguments.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        for s in self.symbols() {
            match s {
                Symbol::Var(v) => {
                    out.insert(v);
                }
                Symbol::Sqrt(a) | Symbol::Log(a) => a.collect_vars(out),
            }
        }
    }

    /// All atoms, including nested ones.
    pub fn atoms(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for s in self.symbols() {
            if let Symbol::Sqrt(a) | Symbol::Log(a) = &s {
                out.extend(a.atoms());
                out.insert(s.clone());
            }
        }
        out
    }

    pub fn depends_on(&self, v: &Var) -> bool {
        self.vars().contains(v)
    }

    /// Canonicalization of raw parts: square-root reduction, rationalized
    /// denominators, cancellation.
    fn from_parts(num: Poly, den: DenMap) -> Expr {
        let mut num = num;
        let mut den = den;
        if num.is_zero() {
            return Expr::zero();
        }
        let mut guard = 0;
        loop {
            guard += 1;
            let (n2, changed) = reduce_sqrt_powers(num, &mut den);
            num = n2;
            if num.is_zero() {
                return Expr::zero();
            }
            let target = den
                .iter()
                .find(|(f, _)| has_sqrt(f))
                .map(|(f, e)| (f.clone(), *e));
            match target {
                Some((f, e)) if guard < 64 => {
                    if !rationalize(&mut num, &mut den, &f, e) {
                        break;
                    }
                }
                _ => {
                    if !changed {
                        break;
                    }
                }
            }
        }
        cancel(&mut num, &mut den);
        Expr { num, den }
    }

    pub fn recip(&self) -> Expr {
        assert!(!self.is_zero(), "reciprocal of zero");
        let mut scalar = Rational::one();
        let mut den = DenMap::new();
        insert_factor(&mut scalar, &mut den, self.num.clone(), 1);
        let num = den_product(&self.den).scale(&scalar);
        Expr::from_parts(num, den)
    }

    pub fn checked_div(&self, other: &Expr) -> Option<Expr> {
        (!other.is_zero()).then(|| self * &other.recip())
    }

    pub fn pow(&self, e: i32) -> Expr {
        if e < 0 {
            return self.recip().pow(-e);
        }
        let mut result = Expr::one();
        let mut base = self.clone();
        let mut e = e as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn scale(&self, k: &Rational) -> Expr {
        if k.is_zero() {
            return Expr::zero();
        }
        Expr {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// `sqrt(arg)` with the branch positive on the declared domain. Square
    /// factors come out only when their sign follows from `asm`.
    pub fn sqrt(arg: &Expr, asm: &Assumptions) -> Expr {
        if arg.is_zero() {
            return Expr::zero();
        }
        let (c, prim) = arg.num.content_primitive();
        let mut outside = Expr::one();
        let mut inside_scalar = Rational::one();
        if c.is_negative() {
            inside_scalar = -inside_scalar;
        }
        let (k, m) = rational_square_part(&c.abs());
        outside = outside.scale(&k);
        inside_scalar *= m;

        let (mono, rest) = prim.monomial_content();
        let mut inside_mono = Vec::new();
        for (s, e) in mono.factors() {
            let p = Poly::symbol(s.clone());
            if *e >= 2 && asm.sign_of(&p) == Some(1) {
                outside = &outside * &Expr::symbol(s.clone()).pow((*e / 2) as i32);
                if e % 2 == 1 {
                    inside_mono.push((s.clone(), 1));
                }
            } else {
                inside_mono.push((s.clone(), *e));
            }
        }
        let mut inside_rest = rest;
        if !inside_rest.is_constant() {
            if let Some(g) = inside_rest.sqrt() {
                match asm.sign_of(&g) {
                    Some(1) => {
                        outside = &outside * &Expr::from_poly(g);
                        inside_rest = Poly::one();
                    }
                    Some(-1) => {
                        outside = &outside * &Expr::from_poly(g.neg());
                        inside_rest = Poly::one();
                    }
                    _ => {}
                }
            }
        }
        let mut inside_den = DenMap::new();
        for (f, e) in &arg.den {
            let sign = asm.sign_of(f);
            if *e >= 2 && sign == Some(1) {
                outside = &outside * &Expr::from_poly(f.clone()).pow(-((*e / 2) as i32));
                if e % 2 == 1 {
                    inside_den.insert(f.clone(), 1);
                }
            } else {
                inside_den.insert(f.clone(), *e);
            }
        }
        let inside_num =
            Poly::term(inside_scalar, Monomial::from_factors(inside_mono)).mul(&inside_rest);
        let inside = Expr::from_parts(inside_num, inside_den);
        if inside.is_one() {
            return outside;
        }
        if let Some(q) = inside.as_constant() {
            if let Some(r) = super::poly::rational_sqrt(&q) {
                return outside.scale(&r);
            }
        }
        &outside * &Expr::symbol(Symbol::Sqrt(Arc::new(inside)))
    }

    pub fn log(arg: &Expr) -> Expr {
        if arg.is_one() {
            return Expr::zero();
        }
        Expr::symbol(Symbol::Log(Arc::new(arg.clone())))
    }

    /// Applies a derivation `D` determined by its values on variables;
    /// `d(v) = None` means `D v = 0`. Atoms follow the chain rule.
    pub fn derivation(&self, d: &dyn Fn(&Var) -> Option<Expr>) -> Expr {
        let mut memo: BTreeMap<Symbol, Option<Expr>> = BTreeMap::new();
        self.derivation_memo(d, &mut memo)
    }

    fn derivation_memo(
        &self,
        d: &dyn Fn(&Var) -> Option<Expr>,
        memo: &mut BTreeMap<Symbol, Option<Expr>>,
    ) -> Expr {
        let syms = self.symbols();
        let mut ds: Vec<(Symbol, Expr)> = Vec::new();
        for s in syms {
            let value = if let Some(v) = memo.get(&s) {
                v.clone()
            } else {
                let v = match &s {
                    Symbol::Var(v) => d(v),
                    Symbol::Sqrt(a) => {
                        let da = a.derivation_memo(d, memo);
                        (!da.is_zero()).then(|| &da / &(&Expr::int(2) * &Expr::symbol(s.clone())))
                    }
                    Symbol::Log(a) => {
                        let da = a.derivation_memo(d, memo);
                        (!da.is_zero()).then(|| &da / a.as_ref())
                    }
                };
                let v = v.filter(|e| !e.is_zero());
                memo.insert(s.clone(), v.clone());
                v
            };
            if let Some(v) = value {
                ds.push((s, v));
            }
        }
        if ds.is_empty() {
            return Expr::zero();
        }
        let apply = |p: &Poly| -> Expr {
            let mut acc = Expr::zero();
            for (s, v) in &ds {
                let dp = p.partial(s);
                if !dp.is_zero() {
                    acc = &acc + &(&Expr::from_poly(dp) * v);
                }
            }
            acc
        };
        let inv_den = Expr {
            num: Poly::one(),
            den: self.den.clone(),
        };
        let mut result = &apply(&self.num) * &inv_den;
        if !self.den.is_empty() {
            let mut log_deriv = Expr::zero();
            for (f, e) in &self.den {
                let df = apply(f);
                if df.is_zero() {
                    continue;
                }
                let term = &df / &Expr::from_poly(f.clone());
                log_deriv = &log_deriv + &term.scale(&rat(*e as i64));
            }
            result = &result - &(self * &log_deriv);
        }
        result
    }

    /// Partial derivative with respect to a variable.
    pub fn diff(&self, x: &Var) -> Expr {
        let one = Expr::one();
        self.derivation(&|v: &Var| (v == x).then(|| one.clone()))
    }

    /// Formal partial derivative with respect to a symbol, treating every
    /// other symbol (including atoms) as independent.
    pub fn partial_symbol(&self, s: &Symbol) -> Expr {
        let target = s.clone();
        let mut acc = &Expr::from_poly(self.num.partial(&target))
            * &Expr {
                num: Poly::one(),
                den: self.den.clone(),
            };
        let mut log_deriv = Expr::zero();
        for (f, e) in &self.den {
            let df = f.partial(&target);
            if df.is_zero() {
                continue;
            }
            log_deriv = &log_deriv
                + &(&Expr::from_poly(df) / &Expr::from_poly(f.clone())).scale(&rat(*e as i64));
        }
        if !log_deriv.is_zero() {
            acc = &acc - &(self * &log_deriv);
        }
        acc
    }

    /// Simultaneous substitution of variables, then canonicalization.
    pub fn substitute(&self, map: &BTreeMap<Var, Expr>, asm: &Assumptions) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        let mut cache: BTreeMap<Symbol, Expr> = BTreeMap::new();
        self.substitute_cached(map, asm, &mut cache)
    }

    fn substitute_cached(
        &self,
        map: &BTreeMap<Var, Expr>,
        asm: &Assumptions,
        cache: &mut BTreeMap<Symbol, Expr>,
    ) -> Expr {
        let vars = self.vars();
        if !vars.iter().any(|v| map.contains_key(v)) {
            return self.clone();
        }
        let value_of = |s: &Symbol, cache: &mut BTreeMap<Symbol, Expr>| -> Expr {
            if let Some(v) = cache.get(s) {
                return v.clone();
            }
            let v = match s {
                Symbol::Var(v) => map.get(v).cloned().unwrap_or_else(|| Expr::var(v)),
                Symbol::Sqrt(a) => Expr::sqrt(&a.substitute_cached(map, asm, cache), asm),
                Symbol::Log(a) => Expr::log(&a.substitute_cached(map, asm, cache)),
            };
            cache.insert(s.clone(), v.clone());
            v
        };
        let eval_poly = |p: &Poly, cache: &mut BTreeMap<Symbol, Expr>| -> Expr {
            let mut powers: BTreeMap<(Symbol, u32), Expr> = BTreeMap::new();
            let mut acc = Expr::zero();
            for (m, c) in p.terms() {
                let mut t = Expr::constant(c.clone());
                for (s, e) in m.factors() {
                    let key = (s.clone(), *e);
                    let pw = match powers.get(&key) {
                        Some(pw) => pw.clone(),
                        None => {
                            let base = value_of(s, cache);
                            let pw = base.pow(*e as i32);
                            powers.insert(key, pw.clone());
                            pw
                        }
                    };
                    t = &t * &pw;
                }
                acc = &acc + &t;
            }
            acc
        };
        let mut result = eval_poly(&self.num, cache);
        for (f, e) in &self.den {
            let fv = eval_poly(f, cache);
            result = &result / &fv.pow(*e as i32);
        }
        result
    }

    /// Evaluates at a point given by `val`; `None` on a pole, a negative
    /// square-root argument or a nonpositive logarithm argument. Returns the
    /// value and a magnitude scale for relative comparisons.
    pub fn eval_f64(&self, val: &dyn Fn(&Var) -> Option<f64>) -> Option<(f64, f64)> {
        let sym = |s: &Symbol| -> Option<f64> {
            match s {
                Symbol::Var(v) => val(v),
                Symbol::Sqrt(a) => {
                    let (x, _) = a.eval_f64(val)?;
                    if x < 0.0 {
                        return None;
                    }
                    Some(x.sqrt())
                }
                Symbol::Log(a) => {
                    let (x, _) = a.eval_f64(val)?;
                    if x <= 0.0 {
                        return None;
                    }
                    Some(x.ln())
                }
            }
        };
        let (n, nscale) = self.num.eval_f64(&sym)?;
        let mut d = 1.0;
        for (f, e) in &self.den {
            let (fv, fscale) = f.eval_f64(&sym)?;
            if fv.abs() <= 1e-12 * fscale.max(1e-300) {
                return None;
            }
            d *= fv.powi(*e as i32);
        }
        if !d.is_finite() || d == 0.0 {
            return None;
        }
        Some((n / d, nscale / d.abs()))
    }

    /// Coefficient extraction: the numerator grouped by the part of each
    /// monomial built from symbols selected by `pick`; each group is divided
    /// by the full denominator.
    pub fn collect(&self, pick: &dyn Fn(&Symbol) -> bool) -> BTreeMap<Monomial, Expr> {
        let mut groups: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in self.num.terms() {
            let (sel, rest): (Vec<_>, Vec<_>) =
                m.factors().iter().cloned().partition(|(s, _)| pick(s));
            groups
                .entry(Monomial::from_factors(sel))
                .or_default()
                .add_term(Monomial::from_factors(rest), c.clone());
        }
        let inv_den = Expr {
            num: Poly::one(),
            den: self.den.clone(),
        };
        groups
            .into_iter()
            .map(|(m, p)| (m, &Expr::from_poly(p) * &inv_den))
            .collect()
    }
}

/// Replaces `s^k` (k ≥ 2) for every square-root atom, updating `den`.
fn reduce_sqrt_powers(num: Poly, den: &mut DenMap) -> (Poly, bool) {
    let mut num = num;
    let mut changed = false;
    loop {
        let target = num
            .symbols()
            .into_iter()
            .find(|s| matches!(s, Symbol::Sqrt(_)) && num.degree_in(s) >= 2);
        let Some(s) = target else { break };
        changed = true;
        let arg = match &s {
            Symbol::Sqrt(a) => a.clone(),
            _ => unreachable!(),
        };
        let coeffs = num.to_univariate(&s);
        let max_half = (coeffs.len() - 1) / 2;
        let q = den_product(&arg.den);
        let mut acc = Poly::zero();
        let s_poly = Poly::symbol(s.clone());
        for (k, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let half = k / 2;
            let mut t = c
                .mul(&arg.num.pow(half as u32))
                .mul(&q.pow((max_half - half) as u32));
            if k % 2 == 1 {
                t = t.mul(&s_poly);
            }
            acc = acc.add(&t);
        }
        if max_half > 0 {
            for (f, e) in &arg.den {
                *den.entry(f.clone()).or_insert(0) += e * max_half as u32;
            }
        }
        num = acc;
    }
    (num, changed)
}

/// Removes the square-root atom from denominator factor `f^e` by
/// multiplying with its conjugate. Returns false when the factor is a zero
/// divisor of the atom relation and must stay.
fn rationalize(num: &mut Poly, den: &mut DenMap, f: &Poly, e: u32) -> bool {
    let s = first_sqrt(f).unwrap();
    let arg = match &s {
        Symbol::Sqrt(a) => a.clone(),
        _ => unreachable!(),
    };
    let uni = f.to_univariate(&s);
    if uni.len() != 2 {
        return false;
    }
    let (a, b) = (&uni[0], &uni[1]);
    let q = den_product(&arg.den);
    let new_factor = a.mul(a).mul(&q).sub(&b.mul(b).mul(&arg.num));
    if new_factor.is_zero() {
        return false;
    }
    let conj = a.sub(&b.mul(&Poly::symbol(s.clone())));
    den.remove(f);
    *num = num.mul(&conj.pow(e)).mul(&q.pow(e));
    let mut scalar = Rational::one();
    insert_factor(&mut scalar, den, new_factor, e);
    *num = num.scale(&scalar);
    true
}

fn cancel(num: &mut Poly, den: &mut DenMap) {
    let keys: Vec<Poly> = den.keys().cloned().collect();
    for f in &keys {
        let mut e = den[f];
        if let Some(s) = f.as_symbol() {
            let lowest = num.terms().map(|(m, _)| m.exponent(s)).min().unwrap_or(0);
            let k = lowest.min(e);
            if k > 0 {
                let m = Monomial::symbol(s.clone(), k);
                *num = Poly::from_terms(num.terms().map(|(t, c)| (t.div(&m).unwrap(), c.clone())));
                e -= k;
            }
        } else {
            while e > 0 {
                match num.div_exact(f) {
                    Some(q) => {
                        *num = q;
                        e -= 1;
                    }
                    None => break,
                }
            }
        }
        if e == 0 {
            den.remove(f);
        } else {
            den.insert(f.clone(), e);
        }
    }
    // Nonlinear factors may share a proper divisor with the numerator.
    let nonlinear: Vec<Poly> = den
        .keys()
        .filter(|f| f.total_degree() > 1 && !has_sqrt(f))
        .cloned()
        .collect();
    for f in nonlinear {
        if num.len() > GCD_TERM_CAP || f.len() > GCD_TERM_CAP {
            continue;
        }
        let g = gcd(num, &f);
        if g.is_constant() || g == f {
            continue;
        }
        let e = den.remove(&f).unwrap();
        let h = f.div_exact(&g).unwrap();
        let mut scalar = Rational::one();
        insert_factor(&mut scalar, den, g, e);
        insert_factor(&mut scalar, den, h, e);
        *num = num.scale(&scalar);
        cancel(num, den);
        return;
    }
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<BigRational> for Expr {
    fn from(c: BigRational) -> Self {
        Expr::constant(c)
    }
}

impl<'a> Add<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn add(self, rhs: &'a Expr) -> Expr {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return Expr::from_parts(self.num.add(&rhs.num), self.den.clone());
        }
        let mut den = self.den.clone();
        for (f, e) in &rhs.den {
            let slot = den.entry(f.clone()).or_insert(0);
            *slot = (*slot).max(*e);
        }
        let lift = |x: &Expr| -> Poly {
            let mut p = x.num.clone();
            for (f, e) in &den {
                let have = x.den.get(f).copied().unwrap_or(0);
                if *e > have {
                    p = p.mul(&f.pow(e - have));
                }
            }
            p
        };
        let num = lift(self).add(&lift(rhs));
        Expr::from_parts(num, den)
    }
}

impl<'a> Sub<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn sub(self, rhs: &'a Expr) -> Expr {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn mul(self, rhs: &'a Expr) -> Expr {
        if self.is_zero() || rhs.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = rhs.as_constant() {
            return self.scale(&c);
        }
        if let Some(c) = self.as_constant() {
            return rhs.scale(&c);
        }
        let mut scalar = Rational::one();
        let mut den = self.den.clone();
        for (f, e) in &rhs.den {
            if let Some(slot) = den.get_mut(f) {
                *slot += e;
            } else {
                insert_factor(&mut scalar, &mut den, f.clone(), *e);
            }
        }
        Expr::from_parts(self.num.mul(&rhs.num).scale(&scalar), den)
    }
}

impl<'a> Div<&'a Expr> for &'a Expr {
    type Output = Expr;
    fn div(self, rhs: &'a Expr) -> Expr {
        self * &rhs.recip()
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &'a Expr) -> Expr {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                self.$m(&rhs)
            }
        }
    };
}

owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);
owned_binop!(Div, div);

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |a, b| &a + &b)
    }
}

// ---------------------------------------------------------------------------
// Rendering

fn fmt_rational(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_symbol(s: &Symbol) -> String {
    match s {
        Symbol::Var(v) => v.to_string(),
        Symbol::Sqrt(a) => format!("sqrt({})", a),
        Symbol::Log(a) => format!("log({})", a),
    }
}

fn fmt_monomial(m: &Monomial) -> String {
    m.factors()
        .iter()
        .map(|(s, e)| {
            if *e == 1 {
                fmt_symbol(s)
            } else {
                format!("{}^{}", fmt_symbol(s), e)
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

pub(crate) fn fmt_poly(p: &Poly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in p.terms().rev().enumerate() {
        let neg = c.is_negative();
        let a = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if m.is_one() {
            out.push_str(&fmt_rational(&a));
        } else if a.is_one() {
            out.push_str(&fmt_monomial(m));
        } else if a.is_integer() {
            out.push_str(&format!("{}*{}", fmt_rational(&a), fmt_monomial(m)));
        } else {
            out.push_str(&format!("({})*{}", fmt_rational(&a), fmt_monomial(m)));
        }
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = fmt_poly(&self.num);
        if self.den.is_empty() {
            return write!(f, "{}", num);
        }
        let num = if self.num.len() > 1 || num.starts_with('-') && self.num.len() > 1 {
            format!("({})", num)
        } else {
            num
        };
        let parts: Vec<String> = self
            .den
            .iter()
            .rev()
            .map(|(p, e)| {
                let base = if p.len() > 1 {
                    format!("({})", fmt_poly(p))
                } else {
                    fmt_poly(p)
                };
                if *e == 1 {
                    base
                } else {
                    format!("{}^{}", base, e)
                }
            })
            .collect();
        if parts.len() == 1 && self.den.values().all(|e| *e == 1) {
            write!(f, "{}/{}", num, parts[0])
        } else {
            write!(f, "{}/({})", num, parts.join("*"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::var::VarKind;
    use crate::kernel::workspace::Workspace;

    fn ws() -> (Workspace, Vec<Var>) {
        Workspace::with_vars(&["r", "v", "R1", "R2"], VarKind::Param)
    }

    #[test]
    fn diff_through_atoms() {
        let (ws, v) = ws();
        let e = ws.parse("v/2 + sqrt(r)").unwrap();
        assert_eq!(e.diff(&v[0]), ws.parse("1/(2*sqrt(r))").unwrap());
        let e = ws.parse("r*log(r)").unwrap();
        assert_eq!(e.diff(&v[0]), ws.parse("log(r) + 1").unwrap());
        assert!(Expr::int(7).diff(&v[0]).is_zero());
    }

    #[test]
    fn sqrt_of_square_needs_ordering() {
        let (mut ws, v) = ws();
        let e = ws.parse("sqrt(r)").unwrap();
        let mut map = BTreeMap::new();
        map.insert(v[0].clone(), ws.parse("(R1 - R2)^2/4").unwrap());
        let unordered = e.substitute(&map, ws.assumptions());
        assert!(!unordered.atoms().is_empty());
        ws.assume("R1 > R2").unwrap();
        let ordered = e.substitute(&map, ws.assumptions());
        assert_eq!(ordered, ws.parse("(R1 - R2)/2").unwrap());
        assert_eq!(ordered.pow(2), map[&v[0]]);
    }

    #[test]
    fn substitution_examples() {
        let (ws, v) = ws();
        let e = ws.parse("v^2").unwrap();
        let mut map = BTreeMap::new();
        map.insert(v[1].clone(), ws.parse("R1 + R2").unwrap());
        assert_eq!(
            e.substitute(&map, ws.assumptions()),
            ws.parse("R1^2 + 2*R1*R2 + R2^2").unwrap()
        );
        let ident: BTreeMap<Var, Expr> = v.iter().map(|x| (x.clone(), Expr::var(x))).collect();
        let e = ws.parse("sqrt(r)/(v - R1) + log(R2)").unwrap();
        assert_eq!(e.substitute(&ident, ws.assumptions()), e);
    }

    #[test]
    fn denominators_are_rationalized_and_cancelled() {
        let (ws, _) = ws();
        let e = ws.parse("1/(1 + sqrt(r))").unwrap();
        assert!(e.den_factors().keys().all(|f| !has_sqrt(f)));
        assert_eq!(e * ws.parse("1 + sqrt(r)").unwrap(), Expr::one());
        let e = ws.parse("(r^2 - v^2)/(r - v)").unwrap();
        assert_eq!(e, ws.parse("r + v").unwrap());
        let e = ws.parse("(r^2 - v^2)/(r^2 + 2*r*v + v^2)").unwrap();
        assert_eq!(e, ws.parse("(r - v)/(r + v)").unwrap());
    }

    #[test]
    fn rendering_is_stable_under_reparse() {
        let (ws, _) = ws();
        let e = ws
            .parse("(R1 - R2)^6/384 + sqrt(r)*log(v)/(r - v)^2")
            .unwrap();
        let text = e.to_string();
        assert_eq!(ws.parse(&text).unwrap().to_string(), text);
    }
}
