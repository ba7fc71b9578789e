use super::second::{Generator, SecondOrderReport};
use super::{quadratic_coefficients, total_derivative_check, Perturbation, PerturbationError};
use crate::hydro::check_conserved0;
use crate::hydro::matrix::ExprMatrix;
use crate::kernel::{Expr, ZeroTester};
use crate::verdict::{all_passed, Check, Verdict};

/// `F2` extending `F0 = ∫ f0 dx` to second order.
#[derive(Clone, Debug, PartialEq)]
pub struct Extension {
    pub f0: Expr,
    /// Riemann-chart density of `F2`.
    pub f2: Expr,
    /// `D_ij`, present for the direct route.
    pub d: Option<ExprMatrix>,
    pub mu: Vec<Expr>,
    /// `μ_i − μ_j` nonzero for all `i ≠ j`.
    pub generic: bool,
    pub verdict: Verdict,
    /// First failed check.
    pub witness: Option<Check>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtendError {
    #[error("`{f0}` is not conserved by the dispersionless flow: {residual}")]
    NotConserved { f0: String, residual: String },
    #[error("`{f0}` is non-generic: μ_{i} − μ_{j} vanishes identically")]
    NonGeneric { f0: String, i: usize, j: usize },
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
}

fn conserved_mu(
    pert: &Perturbation,
    f0: &Expr,
    zero: &ZeroTester,
    require_generic: bool,
) -> Result<(Vec<Expr>, bool), ExtendError> {
    let rep = check_conserved0(pert.sys(), Some(pert.chart()), f0, zero);
    if !rep.conserved {
        let bad = rep
            .checks
            .iter()
            .find(|c| !c.passed)
            .map(|c| c.residual.clone())
            .unwrap_or_default();
        return Err(ExtendError::NotConserved {
            f0: f0.to_string(),
            residual: bad,
        });
    }
    let mu = rep.mu.expect("chart given");
    let n = mu.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if require_generic && zero.is_zero(&(&mu[i] - &mu[j])) {
                return Err(ExtendError::NonGeneric {
                    f0: f0.to_string(),
                    i: i + 1,
                    j: j + 1,
                });
            }
        }
    }
    Ok((mu, rep.generic.unwrap_or(false)))
}

/// `{H0, F2} + {H2, F0}` must be a total derivative.
fn final_check(
    pert: &Perturbation,
    f0r: &Expr,
    f2: &Expr,
    zero: &ZeroTester,
) -> Result<Check, PerturbationError> {
    let a = pert.bracket(pert.h0(), f2)?;
    let b = pert.bracket(pert.h2(), f0r)?;
    Ok(total_derivative_check(
        "extension-identity",
        &(&a + &b),
        &pert.space(),
        zero,
    ))
}

fn finish(
    f0: &Expr,
    f2: Expr,
    d: Option<ExprMatrix>,
    mu: Vec<Expr>,
    generic: bool,
    checks: Vec<Check>,
) -> Extension {
    let witness = checks.iter().find(|c| !c.passed).cloned();
    Extension {
        f0: f0.clone(),
        f2,
        d,
        mu,
        generic,
        verdict: Verdict::from_bool(all_passed(&checks)),
        witness,
        checks,
    }
}

/// `F2 = {F0, K1}`, cross-checked against
/// `−Σ C_i μ_{i,x} R_i,x + ½ Σ_{i≠j} (μ_i − μ_j) s_ij R_i,x R_j,x`.
pub fn extend_claw(
    pert: &Perturbation,
    report: &SecondOrderReport,
    generator: &Generator,
    f0: &Expr,
    zero: &ZeroTester,
    require_generic: bool,
) -> Result<Extension, ExtendError> {
    let (mu, generic) = conserved_mu(pert, f0, zero, require_generic)?;
    let s = report
        .s
        .as_ref()
        .ok_or(PerturbationError::NotQuasiTrivial)?;
    let space = pert.space();
    let n = pert.n();
    let f0r = pert.chart().to_riemann(f0, zero.workspace().assumptions());
    let via_bracket = pert
        .bracket(&f0r, &generator.density)
        .map_err(PerturbationError::from)?;
    let mut closed = Expr::zero();
    for i in 0..n {
        let rix = space.jet(i, 1);
        let mu_x = space.total_x_derivative(&mu[i]);
        closed = &closed - &(&(&generator.c[i] * &mu_x) * &rix);
        for j in (0..n).filter(|&j| j != i) {
            let coeff = (&(&mu[i] - &mu[j]) * &s[i][j]).scale(&crate::kernel::rational(1, 2));
            closed = &closed + &(&coeff * &(&rix * &space.jet(j, 1)));
        }
    }
    let agree = total_derivative_check("routes-agree", &(&via_bracket - &closed), &space, zero);
    if !agree.passed {
        return Err(PerturbationError::Internal {
            check: agree.name,
            residual: agree.residual,
        }
        .into());
    }
    let last = final_check(pert, &f0r, &closed, zero)?;
    Ok(finish(f0, closed, None, mu, generic, vec![agree, last]))
}

/// Direct route: `D_ii = μ_{i,i} d_ii/λ_{i,i}`, `D_ij = d_ij (μ_i − μ_j)/(λ_i − λ_j)`,
/// then all chart relations and the bracket identity.
pub fn second_order_extension_solve(
    pert: &Perturbation,
    f0: &Expr,
    zero: &ZeroTester,
    require_generic: bool,
) -> Result<Extension, ExtendError> {
    pert.check_distinct(zero)?;
    let (mu, generic) = conserved_mu(pert, f0, zero, require_generic)?;
    let chart = pert.chart();
    let r = chart.riemann_vars();
    let n = pert.n();
    for i in 0..n {
        if zero.is_zero(&chart.lambda_deriv(i, i)) {
            return Err(PerturbationError::FlatSpeed { i: i + 1 }.into());
        }
    }
    let d = quadratic_coefficients(pert.h2(), &pert.space())?;
    let lam = |i: usize| chart.lambda(i);
    let dd: ExprMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        &(&mu[i].diff(&r[i]) * &d[i][i]) / &chart.lambda_deriv(i, i)
                    } else {
                        &(&d[i][j] * &(&mu[i] - &mu[j])) / &(lam(i) - lam(j))
                    }
                })
                .collect()
        })
        .collect();
    // λ_{i,l}D_ij + λ_{j,i}D_jl + λ_{i,j}D_il + (λ_i−λ_l)D_{lj,i} + (λ_j−λ_l)D_{li,j} + (λ_l−λ_j)D_{ij,l}
    let side = |sp: &dyn Fn(usize) -> Expr, m: &ExprMatrix, i: usize, j: usize, l: usize| -> Expr {
        let dv = |k: usize, a: usize| sp(k).diff(&r[a]);
        let t1 = &(&(&dv(i, l) * &m[i][j]) + &(&dv(j, i) * &m[j][l])) + &(&dv(i, j) * &m[i][l]);
        let t2 = &(&(&sp(i) - &sp(l)) * &m[l][j].diff(&r[i]))
            + &(&(&sp(j) - &sp(l)) * &m[l][i].diff(&r[j]));
        let t3 = &(&sp(l) - &sp(j)) * &m[i][j].diff(&r[l]);
        &(&t1 + &t2) + &t3
    };
    let lam_f = |k: usize| chart.lambda(k).clone();
    let mu_f = |k: usize| mu[k].clone();
    let mut checks = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let res = &side(&lam_f, &dd, i, j, l) - &side(&mu_f, &d, i, j, l);
                checks.push(Check::zero(
                    format!("relation[{}][{}][{}]", i + 1, j + 1, l + 1),
                    &res,
                    zero,
                ));
            }
        }
    }
    let space = pert.space();
    let mut f2 = Expr::zero();
    for i in 0..n {
        for j in 0..n {
            f2 = &f2 + &(&dd[i][j] * &(&space.jet(i, 1) * &space.jet(j, 1)));
        }
    }
    let f0r = chart.to_riemann(f0, zero.workspace().assumptions());
    checks.push(final_check(pert, &f0r, &f2, zero)?);
    Ok(finish(f0, f2, Some(dd), mu, generic, checks))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::second::{build_h2_canonical, quasi_trivialize, second_order_check};
    use super::*;

    fn water_wave_case() -> (crate::kernel::Workspace, Perturbation) {
        let (ws, sys, chart) = water_wave();
        let h2 = ws.parse("(1/6)*r^3*v_x^2").unwrap();
        let pert =
            Perturbation::from_state(sys, chart, &Expr::zero(), &h2, ws.assumptions()).unwrap();
        (ws, pert)
    }

    #[test]
    fn direct_route_on_water_wave() {
        let (ws, pert) = water_wave_case();
        let zt = ZeroTester::new(&ws);
        for f in ["r", "v", "r*v", "(1/2)*r*v^2 + (1/2)*r^2"] {
            let ext =
                second_order_extension_solve(&pert, &ws.parse(f).unwrap(), &zt, false).unwrap();
            assert_eq!(ext.verdict, Verdict::Pass, "{f}: {:?}", ext.witness);
        }
        let log = ws.parse("(1/2)*v^2 + r*log(r)").unwrap();
        let ext = second_order_extension_solve(&pert, &log, &zt, false).unwrap();
        assert_eq!(ext.verdict, Verdict::Fail);
        assert!(ext.generic);
        assert!(!ext.checks.last().unwrap().passed);
    }

    #[test]
    fn non_generic_flag_and_error() {
        let (ws, pert) = water_wave_case();
        let zt = ZeroTester::new(&ws);
        let rv = ws.parse("r*v").unwrap();
        let ext = second_order_extension_solve(&pert, &rv, &zt, false).unwrap();
        assert!(!ext.generic);
        assert!(ext.f2.is_zero());
        assert_eq!(
            second_order_extension_solve(&pert, &rv, &zt, true).unwrap_err(),
            ExtendError::NonGeneric {
                f0: rv.to_string(),
                i: 1,
                j: 2
            }
        );
        let bad = ws.parse("r^2").unwrap();
        assert!(matches!(
            second_order_extension_solve(&pert, &bad, &zt, false),
            Err(ExtendError::NotConserved { .. })
        ));
    }

    #[test]
    fn self_extension_gives_d() {
        let (ws, pert) = water_wave_case();
        let zt = ZeroTester::new(&ws);
        let ext = second_order_extension_solve(&pert, pert.sys().h0(), &zt, false).unwrap();
        assert_eq!(ext.verdict, Verdict::Pass);
        let d = quadratic_coefficients(pert.h2(), &pert.space()).unwrap();
        assert_eq!(ext.d.unwrap(), d);
    }

    #[test]
    fn generator_route_on_canonical_h2() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let p = |s: &str| ws.parse(s).unwrap();
        let h2 =
            build_h2_canonical(&chart, &[p("R1^2"), p("1")], &[p("R2^2"), p("R1*R2")]).unwrap();
        let pert = Perturbation::new(sys, chart, Expr::zero(), h2, ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        let g = quasi_trivialize(&pert, &rep, &zt).unwrap();
        for f in [
            "r",
            "v",
            "r*v",
            "(1/2)*r*v^2 + (1/2)*r^2",
            "(1/2)*v^2 + r*log(r)",
        ] {
            let ext = extend_claw(&pert, &rep, &g, &p(f), &zt, false).unwrap();
            assert_eq!(ext.verdict, Verdict::Pass, "{f}");
        }
        // μ constant for rv, so the C-part vanishes
        let ext = extend_claw(&pert, &rep, &g, &p("r*v"), &zt, false).unwrap();
        assert!(ext.f2.is_zero());
        // F0 = H0 reproduces H2
        let ext = extend_claw(&pert, &rep, &g, pert.sys().h0(), &zt, false).unwrap();
        assert!(pert
            .space()
            .is_total_derivative(&(&ext.f2 - pert.h2()), &zt));
    }
}
