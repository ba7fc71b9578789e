//! Antiderivatives over a small, decidable class.
//!
//! Supported integrands, with `x` the integration variable and every other
//! symbol free of `x`:
//! - polynomials in `x` over a single linear denominator `(a*x + b)^k`,
//!   which covers `x^n`, `1/x` and `1/(x - c)^k`;
//! - polynomials in `x` and `sqrt(x)` over `x^k` (half-integer powers).
//!
//! Anything else is rejected with [`IntegrateError::NotIntegrable`].

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::One;

use super::expr::Expr;
use super::poly::{Poly, Rational, Symbol};
use super::var::{Var, VarKind};
use super::workspace::Assumptions;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrateError {
    #[error("not integrable in supported class: {0}")]
    NotIntegrable(String),
}

fn not_integrable(e: &Expr, why: &str) -> IntegrateError {
    IntegrateError::NotIntegrable(format!("{} ({})", e, why))
}

fn free_of(p: &Poly, x: &Var) -> bool {
    !Expr::from_poly(p.clone()).depends_on(x)
}

/// Returns `F` with `diff(F, x) = e`.
pub fn antiderivative(e: &Expr, x: &Var, asm: &Assumptions) -> Result<Expr, IntegrateError> {
    if e.is_zero() {
        return Ok(Expr::zero());
    }
    if !e.depends_on(x) {
        return Ok(e * &Expr::var(x));
    }
    let xs = Symbol::Var(x.clone());
    let sqrt_x = Symbol::Sqrt(Arc::new(Expr::var(x)));
    // Only x itself and sqrt(x) may carry the x-dependence of the numerator.
    for s in e.numer().symbols() {
        if s != xs && s != sqrt_x && Expr::symbol(s.clone()).depends_on(x) {
            return Err(not_integrable(
                e,
                "transcendental dependence on the variable",
            ));
        }
    }
    let mut free_den = Poly::one();
    let mut linear: Option<(Poly, u32)> = None;
    for (f, k) in e.den_factors() {
        if free_of(f, x) {
            free_den = free_den.mul(&f.pow(*k));
            continue;
        }
        let uni = f.to_univariate(&xs);
        if uni.len() != 2 || !uni.iter().all(|c| free_of(c, x)) {
            return Err(not_integrable(e, "denominator not linear in the variable"));
        }
        if linear.is_some() {
            return Err(not_integrable(
                e,
                "several denominator factors in the variable",
            ));
        }
        linear = Some((f.clone(), *k));
    }
    let has_sqrt = e.numer().contains(&sqrt_x);
    let inv_free = Expr::from_num_den(Poly::one(), free_den);

    if has_sqrt {
        let k = match &linear {
            None => 0,
            Some((f, k)) if *f == Poly::symbol(xs.clone()) => *k as i64,
            Some(_) => return Err(not_integrable(e, "square root over a shifted denominator")),
        };
        let mut acc = Expr::zero();
        for (m, c) in e.numer().terms() {
            let (p, rest) = m.split_off(&xs);
            let (h, rest) = rest.split_off(&sqrt_x);
            // x^(p - k) * sqrt(x)^h with h in {0, 1}
            let twice = 2 * (p as i64 - k) + h as i64;
            let coeff = Expr::from_poly(Poly::term(c.clone(), rest));
            let piece = if twice == -2 {
                Expr::log(&Expr::var(x))
            } else {
                let q = Rational::new(BigInt::from(twice + 2), BigInt::from(2));
                let whole = (twice + 2).div_euclid(2) as i32;
                let half = (twice + 2).rem_euclid(2);
                let mut t = Expr::var(x).pow(whole);
                if half == 1 {
                    t = &t * &Expr::symbol(sqrt_x.clone());
                }
                t.scale(&(Rational::one() / q))
            };
            acc = &acc + &(&coeff * &piece);
        }
        return Ok(&acc * &inv_free);
    }

    let (lin, k) = linear.unwrap_or((Poly::symbol(xs.clone()), 0));
    let uni = lin.to_univariate(&xs);
    let (b, a) = (
        Expr::from_poly(uni[0].clone()),
        Expr::from_poly(uni[1].clone()),
    );
    // u = a*x + b; x = (u - b)/a; dx = du/a
    let u = Var::new("u", u32::MAX, VarKind::Param);
    let ue = Expr::var(&u);
    let mut map = BTreeMap::new();
    map.insert(x.clone(), &(&ue - &b) / &a);
    let in_u = Expr::from_poly(e.numer().clone()).substitute(&map, asm);
    let us = Symbol::Var(u.clone());
    let mut acc = Expr::zero();
    for (m, c) in in_u.numer().terms() {
        let (j, rest) = m.split_off(&us);
        let coeff = Expr::from_poly(Poly::term(c.clone(), rest));
        let n = j as i64 - k as i64;
        let piece = if n == -1 {
            Expr::log(&ue)
        } else {
            ue.pow((n + 1) as i32)
                .scale(&Rational::new(BigInt::one(), BigInt::from(n + 1)))
        };
        acc = &acc + &(&coeff * &piece);
    }
    let in_u_den = Expr::from_num_den(Poly::one(), in_u.denom_poly());
    let acc = &(&acc * &in_u_den) / &a;
    let mut back = BTreeMap::new();
    back.insert(u, Expr::from_poly(lin));
    let result = acc.substitute(&back, asm);
    Ok(&result * &inv_free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::workspace::Workspace;

    fn check(ws: &Workspace, x: &Var, src: &str) -> Expr {
        let e = ws.parse(src).unwrap();
        let f = antiderivative(&e, x, ws.assumptions()).unwrap();
        assert_eq!(f.diff(x), e, "d/dx of {f} should give back {src}");
        f
    }

    #[test]
    fn spec_examples() {
        let (ws, v) = Workspace::with_vars(&["x", "y"], VarKind::Param);
        let f = check(&ws, &v[0], "x^2");
        assert_eq!(f, ws.parse("x^3/3").unwrap());
        let f = check(&ws, &v[0], "1/x");
        assert_eq!(f, ws.parse("log(x)").unwrap());
        let e = ws.parse("log(x)*x").unwrap();
        assert!(antiderivative(&e, &v[0], ws.assumptions()).is_err());
    }

    #[test]
    fn shifted_and_half_integer_powers() {
        let (ws, v) = Workspace::with_vars(&["x", "y"], VarKind::Param);
        check(&ws, &v[0], "(x^3 + y)/(x - y)");
        check(&ws, &v[0], "y^2/(2*x + y)^3");
        check(&ws, &v[0], "1/sqrt(x)");
        check(&ws, &v[0], "x*sqrt(x) + y/x^2 + 3/x");
        check(&ws, &v[0], "(x + y)^4/(y + 1)");
    }

    #[test]
    fn unsupported_shapes_are_rejected() {
        let (ws, v) = Workspace::with_vars(&["x", "y"], VarKind::Param);
        for src in ["1/(x^2 + 1)", "1/(x*(x - y))", "sqrt(x + y)", "log(x)"] {
            let e = ws.parse(src).unwrap();
            assert!(
                antiderivative(&e, &v[0], ws.assumptions()).is_err(),
                "{src}"
            );
        }
    }
}
