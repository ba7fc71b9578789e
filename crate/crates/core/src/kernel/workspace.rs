use std::collections::BTreeMap;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::parse::{parse_expr, ParseError};
use super::poly::{Poly, Symbol};
use super::var::{Var, VarKind};

/// Polynomials declared positive on the working domain.
///
/// Used to fix square-root branches (`sqrt(x^2) -> x` needs `x > 0`) and to
/// filter sample points of the probabilistic zero test.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assumptions {
    positive: Vec<Poly>,
}

impl Assumptions {
    pub fn new() -> Self {
        Assumptions::default()
    }

    /// Declares `p > 0`. Only the primitive part is kept, with its sign folded
    /// in so that the stored polynomial is itself positive.
    pub fn assume_positive(&mut self, p: &Poly) {
        let (c, prim) = p.content_primitive();
        if prim.is_constant() {
            return;
        }
        let stored = if c.is_negative() { prim.neg() } else { prim };
        if !self.positive.contains(&stored) {
            self.positive.push(stored);
        }
    }

    pub fn positive(&self) -> &[Poly] {
        &self.positive
    }

    /// Sign of `p` on the domain when it follows from the declarations:
    /// `p` must be a constant times a product of declared-positive factors,
    /// or a constant times a perfect square.
    pub fn sign_of(&self, p: &Poly) -> Option<i8> {
        if p.is_zero() {
            return Some(0);
        }
        let (c, mut rest) = p.content_primitive();
        let mut sign: i8 = if c.is_negative() { -1 } else { 1 };
        let mut progress = true;
        while !rest.is_constant() && progress {
            progress = false;
            for a in &self.positive {
                for cand in [a.clone(), a.neg()] {
                    if let Some(q) = rest.div_exact(&cand) {
                        let (qc, qp) = q.content_primitive();
                        // cand = ±a with a > 0
                        if cand != *a {
                            sign = -sign;
                        }
                        if qc.is_negative() {
                            sign = -sign;
                        }
                        rest = qp;
                        progress = true;
                        break;
                    }
                }
                if progress {
                    break;
                }
            }
        }
        if rest.is_constant() {
            return Some(sign);
        }
        if rest.sqrt().is_some() {
            return Some(sign);
        }
        None
    }
}

/// Settings of the probabilistic zero test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
    pub points: usize,
    pub tolerance: f64,
    pub max_retries: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            lo: 0.5,
            hi: 3.0,
            seed: 0,
            points: 8,
            tolerance: 1e-10,
            max_retries: 200,
        }
    }
}

/// Environment variable holding the default sample box as `lo,hi`.
pub const SAMPLE_BOX_ENV: &str = "HAMPERTURB_SAMPLE_BOX";

impl SamplingConfig {
    /// Default configuration, with the box overridden by
    /// [`SAMPLE_BOX_ENV`] when it holds a valid `lo,hi` pair.
    pub fn from_env() -> Self {
        let mut cfg = SamplingConfig::default();
        if let Ok(text) = std::env::var(SAMPLE_BOX_ENV) {
            if let Some((lo, hi)) = parse_box(&text) {
                cfg.lo = lo;
                cfg.hi = hi;
            }
        }
        cfg
    }
}

pub fn parse_box(text: &str) -> Option<(f64, f64)> {
    let (a, b) = text.split_once(',')?;
    let lo: f64 = a.trim().parse().ok()?;
    let hi: f64 = b.trim().parse().ok()?;
    (lo.is_finite() && hi.is_finite() && lo < hi).then_some((lo, hi))
}

/// Declared variables, domain assumptions and zero-test settings.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    vars: Vec<Var>,
    by_name: BTreeMap<String, Var>,
    assumptions: Assumptions,
    sampling: SamplingConfig,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum WorkspaceError {
    #[error("variable `{0}` declared twice")]
    Duplicate(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
}

impl Workspace {
    pub fn new() -> Self {
        Workspace::default()
    }

    pub fn with_sampling(mut self, sampling: SamplingConfig) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn declare(&mut self, name: &str, kind: VarKind) -> Result<Var, WorkspaceError> {
        let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && name.chars().all(|c| c.is_ascii_alphanumeric())
            && name != "sqrt"
            && name != "log";
        if !valid {
            return Err(WorkspaceError::InvalidName(name.to_string()));
        }
        if self.by_name.contains_key(name) {
            return Err(WorkspaceError::Duplicate(name.to_string()));
        }
        let v = Var::new(name, self.vars.len() as u32, kind);
        self.vars.push(v.clone());
        self.by_name.insert(name.to_string(), v.clone());
        Ok(v)
    }

    /// Declares each name in order; panics on invalid names (test helper).
    pub fn with_vars(names: &[&str], kind: VarKind) -> (Self, Vec<Var>) {
        let mut ws = Workspace::new();
        let vars = names
            .iter()
            .map(|n| ws.declare(n, kind).expect("valid variable name"))
            .collect();
        (ws, vars)
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn vars_of_kind(&self, kind: VarKind) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|v| v.kind() == kind)
            .cloned()
            .collect()
    }

    /// Resolves a plain or jet identifier: `r`, `r_x`, `r_xx`, `r_3`.
    pub fn lookup(&self, ident: &str) -> Option<Var> {
        if let Some(v) = self.by_name.get(ident) {
            return Some(v.clone());
        }
        let (base, suffix) = ident.rsplit_once('_')?;
        let v = self.by_name.get(base)?;
        if !suffix.is_empty() && suffix.chars().all(|c| c == 'x') {
            return Some(v.jet(suffix.len() as u32));
        }
        let order: u32 = suffix.parse().ok()?;
        (order > 0).then(|| v.jet(order))
    }

    pub fn assumptions(&self) -> &Assumptions {
        &self.assumptions
    }

    pub fn sampling(&self) -> &SamplingConfig {
        &self.sampling
    }

    pub fn sampling_mut(&mut self) -> &mut SamplingConfig {
        &mut self.sampling
    }

    /// Declares `e > 0`; only the numerator matters when the denominator is
    /// already known positive, so rational inputs use their numerator.
    pub fn assume_positive(&mut self, e: &Expr) {
        self.assumptions.assume_positive(e.numer());
    }

    /// Parses and declares `lhs > rhs` or `lhs < rhs`.
    pub fn assume(&mut self, text: &str) -> Result<(), ParseError> {
        let (lhs, rhs, flip) = if let Some((a, b)) = text.split_once('>') {
            (a, b, false)
        } else if let Some((a, b)) = text.split_once('<') {
            (a, b, true)
        } else {
            return Err(ParseError::Syntax {
                pos: 0,
                message: "assumption must have the form `a > b` or `a < b`".into(),
            });
        };
        let l = self.parse(lhs)?;
        let r = self.parse(rhs)?;
        let diff = if flip { &r - &l } else { &l - &r };
        self.assume_positive(&diff);
        Ok(())
    }

    pub fn parse(&self, src: &str) -> Result<Expr, ParseError> {
        parse_expr(src, self)
    }

    pub fn var_expr(&self, v: &Var) -> Expr {
        Expr::var(v)
    }

    /// True when `s` is a declared-positive variable.
    pub fn is_positive_symbol(&self, s: &Symbol) -> bool {
        self.assumptions.sign_of(&Poly::symbol(s.clone())) == Some(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_identifiers_resolve() {
        let (ws, vars) = Workspace::with_vars(&["r", "v"], VarKind::State);
        assert_eq!(ws.lookup("r_x"), Some(vars[0].jet(1)));
        assert_eq!(ws.lookup("v_xx"), Some(vars[1].jet(2)));
        assert_eq!(ws.lookup("v_3"), Some(vars[1].jet(3)));
        assert_eq!(ws.lookup("w"), None);
        assert_eq!(ws.lookup("v_0"), None);
    }

    #[test]
    fn sign_from_declared_factors() {
        let (mut ws, _) = Workspace::with_vars(&["a", "b"], VarKind::Param);
        ws.assume("a > b").unwrap();
        let d = ws.parse("b - a").unwrap();
        assert_eq!(ws.assumptions().sign_of(d.numer()), Some(-1));
        let sq = ws.parse("(a+b)^2").unwrap();
        assert_eq!(ws.assumptions().sign_of(sq.numer()), Some(1));
        let unknown = ws.parse("a + b").unwrap();
        assert_eq!(ws.assumptions().sign_of(unknown.numer()), None);
    }

    #[test]
    fn sample_box_parsing() {
        assert_eq!(parse_box("0.25, 4"), Some((0.25, 4.0)));
        assert_eq!(parse_box("4,1"), None);
        assert_eq!(parse_box("nope"), None);
    }
}
