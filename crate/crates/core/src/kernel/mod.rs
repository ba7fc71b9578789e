//! Exact symbolic expressions: rational functions over declared variables
//! extended by square-root and logarithm atoms.

pub mod expr;
pub mod integrate;
pub mod parse;
pub mod poly;
pub mod var;
pub mod workspace;
pub mod zero;

pub use expr::Expr;
pub use integrate::{antiderivative, IntegrateError};
pub use parse::{parse_expr, ParseError};
pub use poly::{Monomial, Poly, Rational, Symbol};
pub use var::{Var, VarKind};
pub use workspace::{Assumptions, SamplingConfig, Workspace, WorkspaceError};
pub use zero::{is_zero, zero_test, Provenance, ZeroStats, ZeroTester, ZeroVerdict};

/// Partial derivative of `e` with respect to `x`.
pub fn diff(e: &Expr, x: &Var) -> Expr {
    e.diff(x)
}

/// Simultaneous substitution followed by canonicalization.
pub fn substitute(
    e: &Expr,
    bindings: &std::collections::BTreeMap<Var, Expr>,
    asm: &Assumptions,
) -> Expr {
    e.substitute(bindings, asm)
}

/// The rational number `n`.
pub fn integer(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// The rational number `n/d`.
pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}
