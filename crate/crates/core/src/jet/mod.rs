//! Jet spaces, differential polynomials and local functionals.
//!
//! Densities are [`Expr`]s over the jet variables `u_ℓ = ∂_x^ℓ u` of a list
//! of field variables. Everything else in an expression (parameters) is
//! constant along `x`.

mod bracket;
mod metric;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kernel::{integer, Expr, Symbol, Var, ZeroTester};

pub use bracket::{hamiltonian_flow, poisson_bracket, HamiltonianOperator};
pub use metric::{Metric, MetricError};

/// Which coordinates a density is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    State,
    Riemann,
}

/// Polynomial: polynomial in all jets of order ≥ 1. Extended: rational and
/// logarithmic dependence is also allowed on first jets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingMode {
    Polynomial,
    Extended,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetError {
    #[error("`{var}` appears non-polynomially, which the {mode:?} ring does not allow")]
    RingViolation { var: String, mode: RingMode },
    #[error("density is in the {found:?} chart but the operation works in the {expected:?} chart")]
    ChartMismatch { expected: Chart, found: Chart },
    #[error("denominator factor `{0}` is not homogeneous in the jet grading")]
    NotGraded(String),
}

/// The field variables of one chart.
#[derive(Clone, Debug, PartialEq)]
pub struct JetSpace {
    fields: Vec<Var>,
    chart: Chart,
}

impl JetSpace {
    pub fn new(fields: Vec<Var>, chart: Chart) -> Self {
        assert!(
            fields.iter().all(|v| !v.is_jet()),
            "fields must be base variables"
        );
        JetSpace { fields, chart }
    }

    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[Var] {
        &self.fields
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Index of the field a (jet) variable belongs to.
    pub fn field_index(&self, v: &Var) -> Option<usize> {
        let base = v.base();
        self.fields.iter().position(|f| *f == base)
    }

    pub fn jet(&self, i: usize, order: u32) -> Expr {
        Expr::var(&self.fields[i].jet(order))
    }

    /// Highest jet order of any field appearing in `e` (0 if none).
    pub fn max_order(&self, e: &Expr) -> u32 {
        e.vars()
            .iter()
            .filter(|v| self.field_index(v).is_some())
            .map(|v| v.order())
            .max()
            .unwrap_or(0)
    }

    fn field_jets(&self, e: &Expr, i: usize) -> Vec<Var> {
        let base = &self.fields[i];
        e.vars().into_iter().filter(|v| v.base() == *base).collect()
    }

    /// `∂_x e = Σ_u ∂e/∂u · u_next`, with the chain rule through atoms.
    pub fn total_x_derivative(&self, e: &Expr) -> Expr {
        e.derivation(&|v: &Var| self.field_index(v).map(|_| Expr::var(&v.next())))
    }

    /// `∂_x^k e`.
    pub fn total_x_derivative_n(&self, e: &Expr, k: u32) -> Expr {
        let mut out = e.clone();
        for _ in 0..k {
            out = self.total_x_derivative(&out);
        }
        out
    }

    /// Euler operator `E_β(h) = Σ_ℓ (−∂_x)^ℓ ∂h/∂u^β_ℓ`.
    pub fn euler(&self, h: &Expr, beta: usize) -> Expr {
        let jets = self.field_jets(h, beta);
        let Some(top) = jets.iter().map(|v| v.order()).max() else {
            return Expr::zero();
        };
        // Horner form: E = p_0 - ∂x(p_1 - ∂x(p_2 - ...))
        let base = &self.fields[beta];
        let mut acc = Expr::zero();
        for l in (0..=top).rev() {
            let p = h.diff(&base.jet(l));
            acc = if l == top {
                p
            } else {
                &p - &self.total_x_derivative(&acc)
            };
        }
        acc
    }

    /// All variational derivatives.
    pub fn variational(&self, h: &Expr) -> Vec<Expr> {
        (0..self.n()).map(|b| self.euler(h, b)).collect()
    }

    /// True when every Euler derivative vanishes.
    pub fn is_total_derivative(&self, h: &Expr, zero: &ZeroTester) -> bool {
        (0..self.n()).all(|b| zero.is_zero(&self.euler(h, b)))
    }

    /// `Σ ℓ u_ℓ ∂e/∂u_ℓ`, the jet-degree operator.
    pub fn degree_operator(&self, e: &Expr) -> Expr {
        e.vars()
            .into_iter()
            .filter(|v| v.is_jet() && self.field_index(v).is_some())
            .map(|v| (&Expr::var(&v) * &e.diff(&v)).scale(&integer(v.order() as i64)))
            .sum()
    }

    /// Jet weight of a monomial, counting atoms as weight zero.
    fn weight(&self, m: &crate::kernel::Monomial) -> i64 {
        m.factors()
            .iter()
            .map(|(s, e)| match s {
                Symbol::Var(v) if self.field_index(v).is_some() => v.order() as i64 * *e as i64,
                _ => 0,
            })
            .sum()
    }

    /// Splits `e` into jet-homogeneous parts keyed by degree.
    pub fn degree_decompose(&self, e: &Expr) -> Result<BTreeMap<i64, Expr>, JetError> {
        let mut den_weight = 0;
        for (f, k) in e.den_factors() {
            let weights: Vec<i64> = f.terms().map(|(m, _)| self.weight(m)).collect();
            if weights.windows(2).any(|w| w[0] != w[1]) {
                return Err(JetError::NotGraded(Expr::from_poly(f.clone()).to_string()));
            }
            den_weight += weights.first().copied().unwrap_or(0) * *k as i64;
        }
        let by_weight = e.collect(
            &|s| matches!(s, Symbol::Var(v) if v.is_jet() && self.field_index(v).is_some()),
        );
        let mut out: BTreeMap<i64, Expr> = BTreeMap::new();
        for (m, coeff) in by_weight {
            let w = self.weight(&m) - den_weight;
            let term =
                &coeff * &Expr::from_poly(crate::kernel::Poly::term(num_traits::One::one(), m));
            let slot = out.entry(w).or_default();
            *slot = &*slot + &term;
        }
        out.retain(|_, v| !v.is_zero());
        Ok(out)
    }

    /// Checks that `e` lies in the ring selected by `mode`.
    pub fn check_ring(&self, e: &Expr, mode: RingMode) -> Result<(), JetError> {
        let allowed_order = match mode {
            RingMode::Polynomial => 0,
            RingMode::Extended => 1,
        };
        let bad = |v: &Var| self.field_index(v).is_some() && v.order() > allowed_order;
        let mut inner = Vec::new();
        for f in e.den_factors().keys() {
            inner.extend(Expr::from_poly(f.clone()).vars());
        }
        for atom in e.atoms() {
            match &atom {
                Symbol::Sqrt(a) => {
                    // square roots only ever of base-variable expressions
                    for v in a.vars() {
                        if self.field_index(&v).is_some() && v.is_jet() {
                            return Err(JetError::RingViolation {
                                var: v.to_string(),
                                mode,
                            });
                        }
                    }
                }
                Symbol::Log(a) => inner.extend(a.vars()),
                Symbol::Var(_) => {}
            }
        }
        match inner.into_iter().find(|v| bad(v)) {
            Some(v) => Err(JetError::RingViolation {
                var: v.to_string(),
                mode,
            }),
            None => Ok(()),
        }
    }
}

/// A differential polynomial (or quasi-Miura density) tagged with its chart
/// and ring.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffPoly {
    expr: Expr,
    chart: Chart,
    mode: RingMode,
}

impl DiffPoly {
    pub fn new(expr: Expr, space: &JetSpace, mode: RingMode) -> Result<Self, JetError> {
        space.check_ring(&expr, mode)?;
        Ok(DiffPoly {
            expr,
            chart: space.chart(),
            mode,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn mode(&self) -> RingMode {
        self.mode
    }

    fn same_chart(&self, space: &JetSpace) -> Result<(), JetError> {
        if self.chart != space.chart() {
            return Err(JetError::ChartMismatch {
                expected: space.chart(),
                found: self.chart,
            });
        }
        Ok(())
    }

    pub fn total_x_derivative(&self, space: &JetSpace) -> Result<DiffPoly, JetError> {
        self.same_chart(space)?;
        DiffPoly::new(space.total_x_derivative(&self.expr), space, self.mode)
    }

    pub fn degree_decompose(&self, space: &JetSpace) -> Result<BTreeMap<i64, DiffPoly>, JetError> {
        self.same_chart(space)?;
        space
            .degree_decompose(&self.expr)?
            .into_iter()
            .map(|(k, e)| {
                Ok((
                    k,
                    DiffPoly {
                        expr: e,
                        chart: self.chart,
                        mode: self.mode,
                    },
                ))
            })
            .collect()
    }
}

/// `∫ h dx`, compared modulo total derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFunctional {
    density: DiffPoly,
}

impl LocalFunctional {
    pub fn new(density: DiffPoly) -> Self {
        LocalFunctional { density }
    }

    /// Wraps an expression, choosing the smallest ring that holds it.
    pub fn from_expr(expr: Expr, space: &JetSpace) -> Result<Self, JetError> {
        let mode = if space.check_ring(&expr, RingMode::Polynomial).is_ok() {
            RingMode::Polynomial
        } else {
            RingMode::Extended
        };
        Ok(LocalFunctional::new(DiffPoly::new(expr, space, mode)?))
    }

    pub fn zero(space: &JetSpace) -> Self {
        LocalFunctional::new(DiffPoly {
            expr: Expr::zero(),
            chart: space.chart(),
            mode: RingMode::Polynomial,
        })
    }

    pub fn density(&self) -> &Expr {
        &self.density.expr
    }

    pub fn diff_poly(&self) -> &DiffPoly {
        &self.density
    }

    pub fn chart(&self) -> Chart {
        self.density.chart
    }

    pub fn variational_derivative(&self, space: &JetSpace, beta: usize) -> Result<Expr, JetError> {
        self.density.same_chart(space)?;
        Ok(space.euler(&self.density.expr, beta))
    }

    /// Equality modulo total derivatives.
    pub fn equals(&self, other: &LocalFunctional, space: &JetSpace, zero: &ZeroTester) -> bool {
        let diff = &self.density.expr - &other.density.expr;
        space.is_total_derivative(&diff, zero)
    }

    pub fn add(&self, other: &LocalFunctional) -> LocalFunctional {
        self.combine(other, &self.density.expr + &other.density.expr)
    }

    pub fn sub(&self, other: &LocalFunctional) -> LocalFunctional {
        self.combine(other, &self.density.expr - &other.density.expr)
    }

    pub fn scale(&self, k: &crate::kernel::Rational) -> LocalFunctional {
        LocalFunctional::new(DiffPoly {
            expr: self.density.expr.scale(k),
            ..self.density.clone()
        })
    }

    fn combine(&self, other: &LocalFunctional, expr: Expr) -> LocalFunctional {
        assert_eq!(
            self.chart(),
            other.chart(),
            "functionals from different charts"
        );
        let mode = if self.density.mode == RingMode::Extended
            || other.density.mode == RingMode::Extended
        {
            RingMode::Extended
        } else {
            RingMode::Polynomial
        };
        LocalFunctional::new(DiffPoly {
            expr,
            chart: self.chart(),
            mode,
        })
    }
}
