use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::matrix::{mul, ExprMatrix};
use super::{HydroSystem, RiemannChart};
use crate::kernel::{Expr, Rational, ZeroTester};
use crate::linalg::{combine, solve_symbolic, QMatrix};
use crate::verdict::{all_passed, Check};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClawError {
    #[error("the function basis is empty")]
    EmptyBasis,
}

/// Conservation of `∫ f0` under the dispersionless flow.
#[derive(Clone, Debug, PartialEq)]
pub struct Conserved0Report {
    pub conserved: bool,
    pub degenerate: bool,
    /// `μ_i(R)`, present for conserved densities when a chart is given.
    pub mu: Option<Vec<Expr>>,
    /// `μ_i − μ_j` is nowhere identically zero.
    pub generic: Option<bool>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conserved0Summary {
    pub conserved: bool,
    pub degenerate: bool,
    pub generic: Option<bool>,
    pub mu: Option<Vec<String>>,
}

impl Conserved0Report {
    pub fn summary(&self) -> Conserved0Summary {
        Conserved0Summary {
            conserved: self.conserved,
            degenerate: self.degenerate,
            generic: self.generic,
            mu: self
                .mu
                .as_ref()
                .map(|m| m.iter().map(|e| e.to_string()).collect()),
        }
    }

    /// `b_ij = μ_{i,j}/(μ_i − μ_j)` for `i ≠ j`, where defined.
    pub fn b(&self, chart: &RiemannChart, i: usize, j: usize) -> Option<Expr> {
        let mu = self.mu.as_ref()?;
        mu[i]
            .diff(&chart.riemann_vars()[j])
            .checked_div(&(&mu[i] - &mu[j]))
    }
}

/// `M^α_β = η^{αγ} ∂_γ ∂_β f0`.
pub fn mixed_hessian(sys: &HydroSystem, f0: &Expr) -> ExprMatrix {
    super::velocity_matrix(f0, sys.metric(), sys.fields())
}

fn commutator(sys: &HydroSystem, m: &ExprMatrix) -> ExprMatrix {
    let am = mul(sys.velocity(), m);
    let ma = mul(m, sys.velocity());
    am.iter()
        .zip(&ma)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

pub fn check_conserved0(
    sys: &HydroSystem,
    chart: Option<&RiemannChart>,
    f0: &Expr,
    zero: &ZeroTester,
) -> Conserved0Report {
    let n = sys.n();
    let m = mixed_hessian(sys, f0);
    let c = commutator(sys, &m);
    let mut checks = Vec::new();
    for a in 0..n {
        for b in 0..n {
            checks.push(Check::zero(
                format!("commutator[{}][{}]", a + 1, b + 1),
                &c[a][b],
                zero,
            ));
        }
    }
    let conserved = all_passed(&checks);
    let degenerate = sys.fields().iter().all(|x| zero.is_zero(&f0.diff(x)));
    let mut mu = None;
    let mut generic = None;
    if let (true, Some(chart)) = (conserved, chart) {
        let asm = zero.workspace().assumptions();
        let grad = chart.gradient();
        let mut values = Vec::new();
        for i in 0..n {
            let proj: Vec<Expr> = (0..n)
                .map(|b| (0..n).map(|a| &m[a][b] * &grad[i][a]).sum())
                .collect();
            let Some(pick) = (0..n).find(|&b| !zero.is_zero(&grad[i][b])) else {
                checks.push(Check::fact(
                    format!("eigen-pick[{}]", i + 1),
                    false,
                    "vanishing gradient",
                ));
                values.push(Expr::zero());
                continue;
            };
            let mu_i = &proj[pick] / &grad[i][pick];
            for b in (0..n).filter(|&b| b != pick) {
                checks.push(Check::zero(
                    format!("eigen-relation[{}][{}]", i + 1, b + 1),
                    &(&proj[b] - &(&mu_i * &grad[i][b])),
                    zero,
                ));
            }
            values.push(chart.to_riemann(&mu_i, asm));
        }
        let r = chart.riemann_vars();
        let mut distinct = true;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // a_ij = b_ij, multiplied out
                let a_ij = chart.a(i, j).unwrap_or_default();
                let res = &values[i].diff(&r[j]) - &(&a_ij * &(&values[i] - &values[j]));
                checks.push(Check::zero(
                    format!("a-equals-b[{}][{}]", i + 1, j + 1),
                    &res,
                    zero,
                ));
                if i < j && zero.is_zero(&(&values[i] - &values[j])) {
                    distinct = false;
                }
            }
        }
        generic = Some(distinct);
        mu = Some(values);
    }
    Conserved0Report {
        conserved: all_passed(&checks),
        degenerate,
        mu,
        generic,
        checks,
    }
}

/// Basis of the conserved densities in `span(basis)`, degenerate ones
/// removed, in reduced row echelon form with respect to the basis order.
pub fn solve_claws0(
    sys: &HydroSystem,
    basis: &[Expr],
    zero: &ZeroTester,
) -> Result<Vec<Expr>, ClawError> {
    if basis.is_empty() {
        return Err(ClawError::EmptyBasis);
    }
    let n = sys.n();
    let k = basis.len();
    let comms: Vec<ExprMatrix> = basis
        .iter()
        .map(|f| commutator(sys, &mixed_hessian(sys, f)))
        .collect();
    let mut coeffs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            coeffs.push((0..k).map(|j| comms[j][a][b].clone()).collect::<Vec<_>>());
        }
    }
    let rhs = vec![Expr::zero(); coeffs.len()];
    let kernel = solve_symbolic(&coeffs, &rhs, k)
        .map(|s| s.kernel)
        .unwrap_or_default();
    if kernel.is_empty() {
        return Ok(Vec::new());
    }

    // degenerate part: combinations of kernel vectors with vanishing gradient
    let dens: Vec<Expr> = kernel.iter().map(|c| combine(c, basis)).collect();
    let grad_eqs: Vec<Vec<Expr>> = sys
        .fields()
        .iter()
        .map(|x| dens.iter().map(|d| d.diff(x)).collect())
        .collect();
    let rhs = vec![Expr::zero(); grad_eqs.len()];
    let degenerate: Vec<Vec<Rational>> = solve_symbolic(&grad_eqs, &rhs, dens.len())
        .map(|s| s.kernel)
        .unwrap_or_default()
        .iter()
        .map(|y| {
            (0..k)
                .map(|col| y.iter().zip(&kernel).map(|(w, v)| w * &v[col]).sum())
                .collect()
        })
        .collect();

    let mut kept: Vec<Vec<Rational>> = Vec::new();
    let mut span = degenerate.clone();
    let mut rank = QMatrix::from_rows(pad(&span, k)).rank();
    for v in &kernel {
        span.push(v.clone());
        let next = QMatrix::from_rows(span.clone()).rank();
        if next > rank {
            rank = next;
            kept.push(v.clone());
        } else {
            span.pop();
        }
    }
    if kept.is_empty() {
        return Ok(Vec::new());
    }
    let mut m = QMatrix::from_rows(kept.clone());
    let pivots = m.rref();
    let out: Vec<Expr> = (0..pivots.len())
        .map(|i| {
            let row: Vec<Rational> = (0..k).map(|j| m.get(i, j).clone()).collect();
            combine(&row, basis)
        })
        .filter(|d| !sys.fields().iter().all(|x| zero.is_zero(&d.diff(x))))
        .collect();
    Ok(out)
}

fn pad(rows: &[Vec<Rational>], k: usize) -> Vec<Vec<Rational>> {
    if rows.is_empty() {
        vec![vec![Rational::zero(); k]]
    } else {
        rows.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{poisson_bracket, LocalFunctional, Metric};
    use crate::kernel::{VarKind, Workspace};

    fn setup() -> (Workspace, HydroSystem, RiemannChart) {
        let mut ws = Workspace::new();
        let r = ws.declare("r", VarKind::State).unwrap();
        let v = ws.declare("v", VarKind::State).unwrap();
        let r1 = ws.declare("R1", VarKind::Riemann).unwrap();
        let r2 = ws.declare("R2", VarKind::Riemann).unwrap();
        ws.assume("r > 0").unwrap();
        ws.assume("R1 > R2").unwrap();
        let h0 = ws.parse("-(1/2)*r*v^2 - (1/2)*r^2").unwrap();
        let sys = HydroSystem::new(
            vec![r.clone(), v.clone()],
            Metric::from_integers(&[&[0, 1], &[1, 0]]).unwrap(),
            h0,
        )
        .unwrap();
        let p = |s: &str| ws.parse(s).unwrap();
        let chart = RiemannChart::new(
            vec![r, v],
            vec![r1, r2],
            vec![p("v/2 + sqrt(r)"), p("v/2 - sqrt(r)")],
            vec![p("(R1 - R2)^2/4"), p("R1 + R2")],
            vec![p("-(3/2)*R1 - (1/2)*R2"), p("-(1/2)*R1 - (3/2)*R2")],
            ws.assumptions(),
        )
        .unwrap();
        (ws, sys, chart)
    }

    #[test]
    fn mu_of_rv_and_log_density() {
        let (ws, sys, chart) = setup();
        let zt = ZeroTester::new(&ws);
        let rep = check_conserved0(&sys, Some(&chart), &ws.parse("r*v").unwrap(), &zt);
        assert!(rep.conserved && !rep.degenerate);
        assert_eq!(rep.mu.clone().unwrap(), vec![Expr::one(), Expr::one()]);
        assert_eq!(rep.generic, Some(false));

        let rep = check_conserved0(
            &sys,
            Some(&chart),
            &ws.parse("v^2/2 + r*log(r)").unwrap(),
            &zt,
        );
        assert!(rep.conserved, "{:?}", rep.checks);
        let mu = rep.mu.clone().unwrap();
        // μ_1 = f_rv + √r f_rr for R_1 = v/2 + √r
        assert_eq!(mu[0], ws.parse("2/(R1 - R2)").unwrap());
        assert_eq!(mu[1], ws.parse("-2/(R1 - R2)").unwrap());
        assert_eq!(rep.generic, Some(true));
        assert!(rep.b(&chart, 0, 1).is_some());
    }

    #[test]
    fn constant_and_non_conserved() {
        let (ws, sys, chart) = setup();
        let zt = ZeroTester::new(&ws);
        let rep = check_conserved0(&sys, Some(&chart), &Expr::int(7), &zt);
        assert!(rep.conserved && rep.degenerate);
        let rep = check_conserved0(&sys, Some(&chart), &ws.parse("r^2*v").unwrap(), &zt);
        assert!(!rep.conserved && rep.mu.is_none());
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name.starts_with("commutator") && !c.passed));
    }

    #[test]
    fn census_of_water_wave() {
        let (ws, sys, _) = setup();
        let zt = ZeroTester::new(&ws);
        let names = [
            "1", "r", "v", "r*v", "r^2", "v^2", "r*v^2", "r^2*v", "r^3", "v^3", "r*log(r)",
            "v*log(r)",
        ];
        let basis: Vec<Expr> = names.iter().map(|s| ws.parse(s).unwrap()).collect();
        let got = solve_claws0(&sys, &basis, &zt).unwrap();
        assert_eq!(got.len(), 5, "{got:?}");
        let h0 = LocalFunctional::from_expr(sys.h0().clone(), sys.space()).unwrap();
        for d in &got {
            assert!(check_conserved0(&sys, None, d, &zt).conserved);
            let f = LocalFunctional::from_expr(d.clone(), sys.space()).unwrap();
            let br = poisson_bracket(&f, &h0, &sys.operator(), sys.space()).unwrap();
            assert!(br.equals(&LocalFunctional::zero(sys.space()), sys.space(), &zt));
        }
        let want = ["r", "v", "r*v", "r*v^2/2 + r^2/2", "v^2/2 + r*log(r)"];
        for w in want {
            let w = ws.parse(w).unwrap();
            let mut with: Vec<Expr> = got.clone();
            with.push(w);
            let eqs: Vec<Vec<Expr>> = vec![with];
            let sol = solve_symbolic(&eqs, &[Expr::zero()], got.len() + 1).unwrap();
            assert_eq!(sol.kernel.len(), 1);
        }

        // outside degree three the census grows: r^2 v + r v^3/3 is conserved too
        let extra = ws.parse("r^2*v + r*v^3/3").unwrap();
        assert!(check_conserved0(&sys, None, &extra, &zt).conserved);

        let basis: Vec<Expr> = ["r", "v"].iter().map(|s| ws.parse(s).unwrap()).collect();
        assert_eq!(solve_claws0(&sys, &basis, &zt).unwrap(), basis);
        let basis: Vec<Expr> = ["r^2*v", "v^3"]
            .iter()
            .map(|s| ws.parse(s).unwrap())
            .collect();
        assert!(solve_claws0(&sys, &basis, &zt).unwrap().is_empty());
        assert_eq!(solve_claws0(&sys, &[], &zt), Err(ClawError::EmptyBasis));
    }
}
