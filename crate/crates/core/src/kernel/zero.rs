//! Zero testing.
//!
//! A canonical expression is zero exactly when its numerator is the zero
//! polynomial, provided the atoms occurring in it are algebraically
//! independent over the rational functions. When independence cannot be
//! certified the verdict comes from evaluation at seeded random points and
//! is labelled probabilistic.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::poly::{rational_sqrt, Poly, Symbol};
use super::var::Var;
use super::workspace::{SamplingConfig, Workspace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Probabilistic { seed: u64, points: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroVerdict {
    pub is_zero: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZeroTestError {
    #[error("no valid sample point found after {attempts} attempts")]
    Sampling { attempts: usize },
}

/// True when the atoms of `num` are certified algebraically independent, so
/// that a nonzero canonical numerator is a nonzero function.
fn atoms_certified(num: &Poly) -> bool {
    let mut sqrt_count = 0;
    let mut log_args: Vec<Poly> = Vec::new();
    for s in num.symbols() {
        match s {
            Symbol::Var(_) => {}
            Symbol::Sqrt(arg) => {
                sqrt_count += 1;
                if sqrt_count > 1 || !arg.atoms().is_empty() {
                    return false;
                }
                let radicand = arg.numer().mul(&arg.denom_poly());
                let (c, prim) = radicand.content_primitive();
                if prim.is_constant() {
                    // sqrt of a non-square rational constant is irrational
                    if rational_sqrt(&c.abs()).is_some() {
                        return false;
                    }
                } else if prim.sqrt().is_some() && rational_sqrt(&c.abs()).is_some() {
                    return false;
                }
            }
            Symbol::Log(arg) => {
                if !arg.atoms().is_empty() || !arg.is_polynomial() {
                    return false;
                }
                let (_, prim) = arg.numer().content_primitive();
                if prim.total_degree() != 1 || log_args.contains(&prim) {
                    return false;
                }
                log_args.push(prim);
            }
        }
    }
    true
}

/// Collects variables of an expression, including inside atoms.
fn sample_vars(e: &Expr) -> BTreeSet<Var> {
    e.vars()
}

pub(crate) fn sample_point(
    vars: &BTreeSet<Var>,
    rng: &mut ChaCha8Rng,
    cfg: &SamplingConfig,
) -> Vec<(Var, f64)> {
    vars.iter()
        .map(|v| (v.clone(), rng.gen_range(cfg.lo..cfg.hi)))
        .collect()
}

fn lookup(point: &[(Var, f64)], v: &Var) -> Option<f64> {
    point.iter().find(|(w, _)| w == v).map(|(_, x)| *x)
}

/// Decides whether `e` is identically zero on the workspace domain.
pub fn zero_test(e: &Expr, ws: &Workspace) -> Result<ZeroVerdict, ZeroTestError> {
    if e.is_zero() {
        return Ok(ZeroVerdict {
            is_zero: true,
            provenance: Provenance::Exact,
        });
    }
    if atoms_certified(e.numer()) {
        return Ok(ZeroVerdict {
            is_zero: false,
            provenance: Provenance::Exact,
        });
    }
    let cfg = ws.sampling();
    let num = Expr::from_poly(e.numer().clone());
    let mut vars = sample_vars(&num);
    for p in ws.assumptions().positive() {
        vars.extend(Expr::from_poly(p.clone()).vars());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut accepted = 0;
    let mut attempts = 0;
    let mut all_zero = true;
    while accepted < cfg.points {
        if attempts >= cfg.max_retries {
            return Err(ZeroTestError::Sampling { attempts });
        }
        attempts += 1;
        let point = sample_point(&vars, &mut rng, cfg);
        let val = |v: &Var| lookup(&point, v);
        let in_domain = ws.assumptions().positive().iter().all(|p| {
            Expr::from_poly(p.clone())
                .eval_f64(&val)
                .is_some_and(|(x, _)| x > 0.0)
        });
        if !in_domain {
            continue;
        }
        // the denominator must be finite and nonzero at the point as well
        if e.eval_f64(&val).is_none() {
            continue;
        }
        let Some((x, scale)) = num.eval_f64(&val) else {
            continue;
        };
        accepted += 1;
        if x.abs() > cfg.tolerance * scale.max(f64::MIN_POSITIVE) {
            all_zero = false;
            break;
        }
    }
    Ok(ZeroVerdict {
        is_zero: all_zero,
        provenance: Provenance::Probabilistic {
            seed: cfg.seed,
            points: cfg.points,
        },
    })
}

/// Zero tester that counts how its verdicts were obtained.
#[derive(Debug)]
pub struct ZeroTester<'a> {
    ws: &'a Workspace,
    exact: AtomicUsize,
    probabilistic: AtomicUsize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroStats {
    pub exact: usize,
    pub probabilistic: usize,
    pub seed: u64,
    pub points: usize,
}

impl<'a> ZeroTester<'a> {
    pub fn new(ws: &'a Workspace) -> Self {
        ZeroTester {
            ws,
            exact: AtomicUsize::new(0),
            probabilistic: AtomicUsize::new(0),
        }
    }

    pub fn workspace(&self) -> &'a Workspace {
        self.ws
    }

    pub fn test(&self, e: &Expr) -> Result<ZeroVerdict, ZeroTestError> {
        let v = zero_test(e, self.ws)?;
        match v.provenance {
            Provenance::Exact => self.exact.fetch_add(1, Ordering::Relaxed),
            Provenance::Probabilistic { .. } => self.probabilistic.fetch_add(1, Ordering::Relaxed),
        };
        Ok(v)
    }

    /// Sampling failures count as "not shown to be zero".
    pub fn is_zero(&self, e: &Expr) -> bool {
        self.test(e).is_ok_and(|v| v.is_zero)
    }

    pub fn stats(&self) -> ZeroStats {
        ZeroStats {
            exact: self.exact.load(Ordering::Relaxed),
            probabilistic: self.probabilistic.load(Ordering::Relaxed),
            seed: self.ws.sampling().seed,
            points: self.ws.sampling().points,
        }
    }
}

/// Convenience wrapper returning only the boolean verdict.
pub fn is_zero(e: &Expr, ws: &Workspace) -> bool {
    zero_test(e, ws).is_ok_and(|v| v.is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::var::VarKind;

    #[test]
    fn spec_examples() {
        let (ws, _) = Workspace::with_vars(&["r", "R1", "R2"], VarKind::Param);
        let e = ws.parse("sqrt(r)^2 - r").unwrap();
        assert!(zero_test(&e, &ws).unwrap().is_zero);
        let e = ws.parse("(R1-R2)^2 - (R1^2 - 2*R1*R2 + R2^2)").unwrap();
        let v = zero_test(&e, &ws).unwrap();
        assert!(v.is_zero && v.provenance == Provenance::Exact);
        let e = ws.parse("R1 - R2").unwrap();
        let v = zero_test(&e, &ws).unwrap();
        assert!(!v.is_zero && v.provenance == Provenance::Exact);
    }

    #[test]
    fn related_atoms_fall_back_to_sampling() {
        let (ws, _) = Workspace::with_vars(&["r", "v"], VarKind::Param);
        let e = ws.parse("log(r^2) - 2*log(r)").unwrap();
        let v = zero_test(&e, &ws).unwrap();
        assert!(v.is_zero);
        assert!(matches!(v.provenance, Provenance::Probabilistic { .. }));
        let e = ws.parse("sqrt(r)*sqrt(v) - sqrt(r*v)").unwrap();
        assert!(zero_test(&e, &ws).unwrap().is_zero);
        let e = ws.parse("log(r*v) - log(r)").unwrap();
        assert!(!zero_test(&e, &ws).unwrap().is_zero);
    }

    #[test]
    fn independent_atoms_are_exact() {
        let (ws, _) = Workspace::with_vars(&["r", "v"], VarKind::Param);
        let e = ws.parse("sqrt(r)*v + log(r - v) + log(v)").unwrap();
        let verdict = zero_test(&e, &ws).unwrap();
        assert_eq!(verdict.provenance, Provenance::Exact);
        assert!(!verdict.is_zero);
    }

    #[test]
    fn empty_domain_is_an_error() {
        let (mut ws, _) = Workspace::with_vars(&["r"], VarKind::Param);
        ws.assume("r > 10").unwrap();
        let e = ws.parse("log(r^2) - 2*log(r)").unwrap();
        assert!(matches!(
            zero_test(&e, &ws),
            Err(ZeroTestError::Sampling { .. })
        ));
    }
}
