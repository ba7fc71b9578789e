//! TOML problem manifests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hydro::{HydroError, HydroSystem};
use crate::jet::{Metric, MetricError};
use crate::kernel::{
    Expr, ParseError, Rational, SamplingConfig, Var, VarKind, Workspace, WorkspaceError,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// State variables, in order.
    pub variables: Vec<String>,
    /// Names of the Riemann invariants; `R1 … Rn` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub riemann: Option<Vec<String>>,
    /// `η^{αβ}`, entries as integers or rational strings.
    pub eta: Vec<Vec<Entry>>,
    pub h0: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<String>,
    /// Builds `h2` from the canonical form instead of `h2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical: Option<CanonicalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(default)]
    pub assumptions: Vec<String>,
    #[serde(default)]
    pub bases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Int(i64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    /// `R_i(v)`.
    pub invariants: Vec<String>,
    /// `v^α(R)`.
    pub inverse: Vec<String>,
    /// `λ_i(R)`.
    pub lambda: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalSpec {
    pub c: Vec<String>,
    pub phi: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "box")]
    pub sample_box: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ManifestError {
    #[error("invalid TOML: {0}")]
    Toml(String),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Schema(u32),
    #[error("{field}: {source}")]
    Parse { field: String, source: ParseError },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("eta: {0}")]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Hydro(#[from] HydroError),
}

fn invalid(field: &str, message: impl Into<String>) -> ManifestError {
    ManifestError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Which jets a density is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityChart {
    State,
    Riemann,
}

/// A validated manifest: declared variables, parsed expressions.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub ws: Workspace,
    pub sys: HydroSystem,
    pub riemann: Vec<Var>,
    pub chart: Option<ParsedChart>,
    pub h1: (Expr, DensityChart),
    pub h2: (Expr, DensityChart),
    pub canonical: Option<(Vec<Expr>, Vec<Expr>)>,
    pub bases: BTreeMap<String, Vec<Expr>>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ParsedChart {
    pub invariants: Vec<Expr>,
    pub inverse: Vec<Expr>,
    pub lambda: Vec<Expr>,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self, ManifestError> {
        let m: Manifest = toml::from_str(text).map_err(|e| ManifestError::Toml(e.to_string()))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(ManifestError::Schema(m.schema_version));
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Declares variables and parses every expression. `seed` overrides the
    /// manifest seed; the sample box comes from the manifest, else the
    /// environment.
    pub fn build(&self, seed: Option<u64>) -> Result<Problem, ManifestError> {
        let n = self.variables.len();
        if n == 0 {
            return Err(invalid("variables", "at least one variable is required"));
        }
        let seed = seed.unwrap_or(self.seed);
        let mut sampling = SamplingConfig::from_env();
        sampling.seed = seed;
        if let Some(s) = &self.sampling {
            if let Some([lo, hi]) = s.sample_box {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(invalid("sampling.box", "need finite lo < hi"));
                }
                sampling.lo = lo;
                sampling.hi = hi;
            }
            if let Some(p) = s.points {
                if p == 0 {
                    return Err(invalid("sampling.points", "must be positive"));
                }
                sampling.points = p;
            }
        }
        let mut ws = Workspace::new().with_sampling(sampling);
        let state = self
            .variables
            .iter()
            .map(|v| ws.declare(v, VarKind::State))
            .collect::<Result<Vec<_>, _>>()?;
        let names: Vec<String> = match &self.riemann {
            Some(r) if r.len() != n => {
                return Err(invalid(
                    "riemann",
                    format!("expected {n} names, got {}", r.len()),
                ))
            }
            Some(r) => r.clone(),
            None => (1..=n).map(|i| format!("R{i}")).collect(),
        };
        let riemann = names
            .iter()
            .map(|v| ws.declare(v, VarKind::Riemann))
            .collect::<Result<Vec<_>, _>>()?;
        for (k, a) in self.assumptions.iter().enumerate() {
            ws.assume(a).map_err(|source| ManifestError::Parse {
                field: format!("assumptions[{k}]"),
                source,
            })?;
        }
        let parse = |field: &str, text: &str| {
            ws.parse(text).map_err(|source| ManifestError::Parse {
                field: field.into(),
                source,
            })
        };

        if self.eta.len() != n {
            return Err(invalid(
                "eta",
                format!("expected {n} rows, got {}", self.eta.len()),
            ));
        }
        let mut eta = Vec::new();
        for (i, row) in self.eta.iter().enumerate() {
            let mut out = Vec::new();
            for (j, e) in row.iter().enumerate() {
                let field = format!("eta[{i}][{j}]");
                let c = match e {
                    Entry::Int(k) => Rational::from_integer((*k).into()),
                    Entry::Text(t) => parse(&field, t)?
                        .as_constant()
                        .ok_or_else(|| invalid(&field, "entry must be a rational constant"))?,
                };
                out.push(c);
            }
            eta.push(out);
        }
        let metric = Metric::new(eta)?;
        let h0 = parse("h0", &self.h0)?;
        if h0
            .vars()
            .iter()
            .any(|v| v.is_jet() || v.kind() != VarKind::State)
        {
            return Err(invalid(
                "h0",
                "must be a function of the state variables only",
            ));
        }
        let sys = HydroSystem::new(state.clone(), metric, h0)?;

        let chart = match &self.chart {
            None => None,
            Some(c) => {
                for (field, list) in [
                    ("chart.invariants", &c.invariants),
                    ("chart.inverse", &c.inverse),
                    ("chart.lambda", &c.lambda),
                ] {
                    if list.len() != n {
                        return Err(invalid(
                            field,
                            format!("expected {n} entries, got {}", list.len()),
                        ));
                    }
                }
                let p = |field: &str, list: &[String]| {
                    list.iter()
                        .enumerate()
                        .map(|(k, t)| parse(&format!("{field}[{k}]"), t))
                        .collect::<Result<Vec<_>, _>>()
                };
                Some(ParsedChart {
                    invariants: p("chart.invariants", &c.invariants)?,
                    inverse: p("chart.inverse", &c.inverse)?,
                    lambda: p("chart.lambda", &c.lambda)?,
                })
            }
        };

        let density =
            |field: &str, text: Option<&String>| -> Result<(Expr, DensityChart), ManifestError> {
                let Some(text) = text else {
                    return Ok((Expr::zero(), DensityChart::State));
                };
                let e = parse(field, text)?;
                let kinds: Vec<VarKind> = e.vars().iter().map(|v| v.kind()).collect();
                let has_state = kinds.contains(&VarKind::State);
                let has_riemann = kinds.contains(&VarKind::Riemann);
                match (has_state, has_riemann) {
                    (true, true) => Err(invalid(field, "mixes state and Riemann variables")),
                    (false, true) => Ok((e, DensityChart::Riemann)),
                    _ => Ok((e, DensityChart::State)),
                }
            };
        let h1 = density("h1", self.h1.as_ref())?;
        let h2 = density("h2", self.h2.as_ref())?;
        let canonical = match &self.canonical {
            None => None,
            Some(_) if self.h2.is_some() => {
                return Err(invalid(
                    "canonical",
                    "give either h2 or canonical, not both",
                ))
            }
            Some(c) => {
                if c.c.len() != n || c.phi.len() != n {
                    return Err(invalid(
                        "canonical",
                        format!("c and phi need {n} entries each"),
                    ));
                }
                let cs =
                    c.c.iter()
                        .enumerate()
                        .map(|(k, t)| parse(&format!("canonical.c[{k}]"), t))
                        .collect::<Result<Vec<_>, _>>()?;
                let phis = c
                    .phi
                    .iter()
                    .enumerate()
                    .map(|(k, t)| parse(&format!("canonical.phi[{k}]"), t))
                    .collect::<Result<Vec<_>, _>>()?;
                Some((cs, phis))
            }
        };
        let mut bases = BTreeMap::new();
        for (name, list) in &self.bases {
            let exprs = list
                .iter()
                .enumerate()
                .map(|(k, t)| parse(&format!("bases.{name}[{k}]"), t))
                .collect::<Result<Vec<_>, _>>()?;
            bases.insert(name.clone(), exprs);
        }
        Ok(Problem {
            name: self.name.clone().unwrap_or_default(),
            ws,
            sys,
            riemann,
            chart,
            h1,
            h2,
            canonical,
            bases,
            seed,
        })
    }
}

/// Monomials of total degree `1..=max` in `vars`.
pub fn monomial_basis(vars: &[Var], max: u32) -> Vec<Expr> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; vars.len()];
    fn rec(k: usize, left: u32, vars: &[Var], exps: &mut Vec<u32>, out: &mut Vec<(u32, Expr)>) {
        if k == vars.len() {
            let deg: u32 = exps.iter().sum();
            if deg > 0 {
                let m = vars
                    .iter()
                    .zip(exps.iter())
                    .fold(Expr::one(), |acc, (v, &e)| {
                        &acc * &Expr::var(v).pow(e as i32)
                    });
                out.push((deg, m));
            }
            return;
        }
        for e in (0..=left).rev() {
            exps[k] = e;
            rec(k + 1, left - e, vars, exps, out);
        }
        exps[k] = 0;
    }
    let mut tagged = Vec::new();
    rec(0, max, vars, &mut exps, &mut tagged);
    tagged.sort_by_key(|(d, _)| *d);
    out.extend(tagged.into_iter().map(|(_, m)| m));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const WATER: &str = r#"
schema_version = 1
name = "water"
variables = ["r", "v"]
eta = [[0, 1], [1, 0]]
h0 = "-(1/2)*r*v^2 - (1/2)*r^2"
h2 = "(1/6)*r^3*v_x^2"
assumptions = ["r > 0", "R1 > R2"]
[chart]
invariants = ["v/2 + sqrt(r)", "v/2 - sqrt(r)"]
inverse = ["(R1 - R2)^2/4", "R1 + R2"]
lambda = ["-(3/2)*R1 - (1/2)*R2", "-(1/2)*R1 - (3/2)*R2"]
[bases]
claws = ["r", "v", "r*log(r)"]
"#;

    #[test]
    fn parses_and_builds() {
        let m = Manifest::from_toml(WATER).unwrap();
        let p = m.build(Some(7)).unwrap();
        assert_eq!(p.seed, 7);
        assert_eq!(p.ws.sampling().seed, 7);
        assert_eq!(p.sys.n(), 2);
        assert_eq!(p.h2.1, DensityChart::State);
        assert_eq!(p.bases["claws"].len(), 3);
        assert_eq!(p.chart.unwrap().lambda.len(), 2);
        let again = Manifest::from_toml(&m.to_toml()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = WATER.replace("[[0, 1], [1, 0]]", "[[0, 1], [2, 0]]");
        assert!(matches!(
            Manifest::from_toml(&bad).unwrap().build(None),
            Err(ManifestError::Metric(MetricError::NotSymmetric(1, 0)))
        ));
        let bad = WATER.replace("schema_version = 1", "schema_version = 9");
        assert_eq!(Manifest::from_toml(&bad), Err(ManifestError::Schema(9)));
        let bad = WATER.replace("r^3*v_x^2", "r^3*v_x*R1_x");
        assert!(matches!(
            Manifest::from_toml(&bad).unwrap().build(None),
            Err(ManifestError::Invalid { .. })
        ));
        let bad = WATER.replace("h0 = ", "h0 = \"r +\"\nxx = ");
        assert!(matches!(
            Manifest::from_toml(&bad),
            Err(ManifestError::Toml(_))
        ));
        let bad = WATER.replace("\"r > 0\"", "\"r >\"");
        assert!(matches!(
            Manifest::from_toml(&bad).unwrap().build(None),
            Err(ManifestError::Parse { .. })
        ));
    }

    #[test]
    fn monomials_by_degree() {
        let (_, v) = Workspace::with_vars(&["a", "b"], VarKind::State);
        let b = monomial_basis(&v, 2);
        let shown: Vec<String> = b.iter().map(|e| e.to_string()).collect();
        assert_eq!(shown.len(), 5);
        assert_eq!(shown[..2], ["a".to_string(), "b".to_string()]);
    }
}
