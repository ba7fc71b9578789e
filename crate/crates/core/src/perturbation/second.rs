use super::{quadratic_coefficients, total_derivative_check, Perturbation, PerturbationError};
use crate::hydro::matrix::ExprMatrix;
use crate::hydro::RiemannChart;
use crate::kernel::{antiderivative, Assumptions, Expr, Symbol, Var, ZeroTester};
use crate::verdict::{all_passed, Check, Verdict};

/// The first violated condition, with the offending expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub condition: String,
    pub expr: Expr,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderReport {
    pub verdict: Verdict,
    pub d: ExprMatrix,
    pub lambda_ii: Vec<Expr>,
    /// `c_i = −d_ii/λ_{i,i}`; equal to `C_i(R_i)` on a pass.
    pub c: Vec<Expr>,
    pub witness: Option<Witness>,
    /// `2 d_ij/(λ_i − λ_j)`, the `s` of the canonical `h2` form.
    pub s_canonical: ExprMatrix,
    /// `(2 d_ij + C_i λ_{i,j} + C_j λ_{j,i})/(λ_i − λ_j)`, reproduced by `φ` in `K1`.
    pub s: Option<ExprMatrix>,
    pub phi: Option<Vec<Expr>>,
    pub checks: Vec<Check>,
}

/// `s_ij = φ_{i,j} − φ_{j,i}`.
pub fn s_from_phi(chart: &RiemannChart, phi: &[Expr]) -> ExprMatrix {
    let r = chart.riemann_vars();
    let n = chart.n();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| &phi[i].diff(&r[j]) - &phi[j].diff(&r[i]))
                .collect()
        })
        .collect()
}

fn check_flat(chart: &RiemannChart, zero: &ZeroTester) -> Result<Vec<Expr>, PerturbationError> {
    (0..chart.n())
        .map(|i| {
            let l = chart.lambda_deriv(i, i);
            if zero.is_zero(&l) {
                Err(PerturbationError::FlatSpeed { i: i + 1 })
            } else {
                Ok(l)
            }
        })
        .collect()
}

/// Analyses `H2` under the assumption `H1 = 0`.
pub fn second_order_check(
    pert: &Perturbation,
    zero: &ZeroTester,
) -> Result<SecondOrderReport, PerturbationError> {
    pert.check_distinct(zero)?;
    let chart = pert.chart();
    let lambda_ii = check_flat(chart, zero)?;
    let n = pert.n();
    let r = chart.riemann_vars();
    let d = quadratic_coefficients(pert.h2(), &pert.space())?;
    let c: Vec<Expr> = (0..n).map(|i| -&(&d[i][i] / &lambda_ii[i])).collect();
    let dl = |i: usize, j: usize| &d[i][j] / &(chart.lambda(i) - chart.lambda(j));

    let mut checks = Vec::new();
    let mut witness = None;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let dc = c[i].diff(&r[j]);
            let check = Check::zero(format!("separated[{}][{}]", i + 1, j + 1), &dc, zero);
            if !check.passed && witness.is_none() {
                witness = Some(Witness {
                    condition: "separated".into(),
                    expr: c[i].clone(),
                    detail: format!(
                        "c{} = -d{}{}/λ{},{} depends on {}",
                        i + 1,
                        i + 1,
                        i + 1,
                        i + 1,
                        i + 1,
                        r[j]
                    ),
                });
            }
            checks.push(check);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let cyc = &(&dl(i, j).diff(&r[k]) + &dl(j, k).diff(&r[i])) + &dl(k, i).diff(&r[j]);
                let check = Check::zero(
                    format!("cyclic[{}][{}][{}]", i + 1, j + 1, k + 1),
                    &cyc,
                    zero,
                );
                if !check.passed && witness.is_none() {
                    witness = Some(Witness {
                        condition: "cyclic".into(),
                        expr: cyc.clone(),
                        detail: format!(
                            "cyclic sum over ({} {} {}) does not vanish",
                            i + 1,
                            j + 1,
                            k + 1
                        ),
                    });
                }
                checks.push(check);
            }
        }
    }
    let mut s_canonical = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            s_canonical[i][j] = dl(i, j).scale(&crate::kernel::integer(2));
        }
    }
    let passed = all_passed(&checks);
    let (s, phi) = if passed {
        let mut s = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let num = &(&d[i][j].scale(&crate::kernel::integer(2))
                    + &(&c[i] * &chart.lambda_deriv(i, j)))
                    + &(&c[j] * &chart.lambda_deriv(j, i));
                s[i][j] = &num / &(chart.lambda(i) - chart.lambda(j));
            }
        }
        let phi = potentials(&s, r, zero)?;
        let back = s_from_phi(chart, &phi);
        for i in 0..n {
            for j in (i + 1)..n {
                let check = Check::zero(
                    format!("potential[{}][{}]", i + 1, j + 1),
                    &(&back[i][j] - &s[i][j]),
                    zero,
                );
                if !check.passed {
                    return Err(PerturbationError::Internal {
                        check: check.name,
                        residual: check.residual,
                    });
                }
                checks.push(check);
            }
        }
        (Some(s), Some(phi))
    } else {
        (None, None)
    };
    Ok(SecondOrderReport {
        verdict: Verdict::from_bool(passed),
        d,
        lambda_ii,
        c,
        witness,
        s_canonical,
        s,
        phi,
        checks,
    })
}

/// `φ` with `φ_{i,j} − φ_{j,i} = s_ij`, gauge-fixed by `φ_1 = 0` and staged
/// quadrature along `R_1, R_2, …`.
fn potentials(
    s: &ExprMatrix,
    r: &[Var],
    zero: &ZeroTester,
) -> Result<Vec<Expr>, PerturbationError> {
    let idx: Vec<usize> = (0..r.len()).collect();
    let mut phi = vec![Expr::zero(); r.len()];
    stage(s, r, &idx, &mut phi, zero.workspace().assumptions(), zero)?;
    Ok(phi)
}

fn stage(
    s: &ExprMatrix,
    r: &[Var],
    idx: &[usize],
    phi: &mut [Expr],
    asm: &Assumptions,
    zero: &ZeroTester,
) -> Result<(), PerturbationError> {
    let Some((&i0, rest)) = idx.split_first() else {
        return Ok(());
    };
    if rest.is_empty() {
        return Ok(());
    }
    let mut part = vec![Expr::zero(); r.len()];
    for &j in rest {
        let f =
            antiderivative(&s[i0][j], &r[i0], asm).map_err(|e| PerturbationError::Quadrature {
                i: i0 + 1,
                j: j + 1,
                s: s[i0][j].to_string(),
                reason: e.to_string(),
            })?;
        part[j] = -&f;
    }
    let n = r.len();
    let mut residual = vec![vec![Expr::zero(); n]; n];
    for &i in rest {
        for &j in rest {
            if i == j {
                continue;
            }
            let res = &s[i][j] - &(&part[i].diff(&r[j]) - &part[j].diff(&r[i]));
            if i < j && !zero.is_zero(&res.diff(&r[i0])) {
                return Err(PerturbationError::Quadrature {
                    i: i + 1,
                    j: j + 1,
                    s: s[i][j].to_string(),
                    reason: format!("not closed: residual depends on {}", r[i0]),
                });
            }
            residual[i][j] = res;
        }
    }
    for &j in rest {
        phi[j] = &phi[j] + &part[j];
    }
    stage(&residual, r, rest, phi, asm, zero)
}

/// `h2 = −Σ C_i λ_{i,i} R_i,x² + ½ Σ_{i≠j} (λ_i − λ_j) s_ij R_i,x R_j,x` with
/// `s_ij = φ_{i,j} − φ_{j,i}`.
pub fn build_h2_canonical(
    chart: &RiemannChart,
    c: &[Expr],
    phi: &[Expr],
) -> Result<Expr, PerturbationError> {
    let n = chart.n();
    let r = chart.riemann_vars();
    for (i, ci) in c.iter().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            if i != j && !ci.diff(rj).is_zero() {
                return Err(PerturbationError::NotSeparated {
                    i: i + 1,
                    var: rj.to_string(),
                });
            }
        }
    }
    let s = s_from_phi(chart, phi);
    let space = chart.riemann_space();
    let mut h2 = Expr::zero();
    for i in 0..n {
        let rix = space.jet(i, 1);
        h2 = &h2 - &(&(&c[i] * &chart.lambda_deriv(i, i)) * &(&rix * &rix));
        for j in (0..n).filter(|&j| j != i) {
            let coeff = (&(chart.lambda(i) - chart.lambda(j)) * &s[i][j])
                .scale(&crate::kernel::rational(1, 2));
            h2 = &h2 + &(&coeff * &(&rix * &space.jet(j, 1)));
        }
    }
    Ok(h2)
}

/// Chart-side `d_ij` of `{H0, K1}`: `d_ii = −C_i λ_{i,i}` and
/// `d_ij = −½(C_i λ_{i,j} + C_j λ_{j,i}) + ½ s_ij (λ_i − λ_j)`.
pub fn chart_d_from_generator_form(chart: &RiemannChart, c: &[Expr], s: &ExprMatrix) -> ExprMatrix {
    let n = chart.n();
    let half = crate::kernel::rational(1, 2);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        -&(&c[i] * &chart.lambda_deriv(i, i))
                    } else {
                        let a = &(&c[i] * &chart.lambda_deriv(i, j))
                            + &(&c[j] * &chart.lambda_deriv(j, i));
                        (&(&s[i][j] * &(chart.lambda(i) - chart.lambda(j))) - &a).scale(&half)
                    }
                })
                .collect()
        })
        .collect()
}

/// State-side `d̃_{αβ} = −½ Σ C_i(λ_{i,α} R_{i,β} + λ_{i,β} R_{i,α})
/// + ½ Σ_{i≠j} s_ij (λ_i − λ_j) R_{i,α} R_{j,β}`, in state variables.
pub fn dtilde_from_generator_form(
    chart: &RiemannChart,
    c: &[Expr],
    s: &ExprMatrix,
    asm: &Assumptions,
) -> ExprMatrix {
    let n = chart.n();
    let half = crate::kernel::rational(1, 2);
    let grad = chart.gradient();
    let v = chart.state_vars();
    let lam: Vec<Expr> = chart
        .lambdas()
        .iter()
        .map(|l| chart.to_state(l, asm))
        .collect();
    let cv: Vec<Expr> = c.iter().map(|x| chart.to_state(x, asm)).collect();
    let sv: ExprMatrix = s
        .iter()
        .map(|row| row.iter().map(|x| chart.to_state(x, asm)).collect())
        .collect();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let mut acc = Expr::zero();
                    for i in 0..n {
                        let sym = &(&lam[i].diff(&v[a]) * &grad[i][b])
                            + &(&lam[i].diff(&v[b]) * &grad[i][a]);
                        acc = &acc - &(&cv[i] * &sym);
                        for j in (0..n).filter(|&j| j != i) {
                            let t =
                                &(&sv[i][j] * &(&lam[i] - &lam[j])) * &(&grad[i][a] * &grad[j][b]);
                            acc = &acc + &t;
                        }
                    }
                    acc.scale(&half)
                })
                .collect()
        })
        .collect()
}

/// `K1 = ∫ Σ C_i(R_i,x log R_i,x − R_i,x) + φ_i R_i,x dx` with its checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub density: Expr,
    pub c: Vec<Expr>,
    pub phi: Vec<Expr>,
    pub checks: Vec<Check>,
}

pub fn quasi_trivialize(
    pert: &Perturbation,
    report: &SecondOrderReport,
    zero: &ZeroTester,
) -> Result<Generator, PerturbationError> {
    let (true, Some(phi)) = (report.verdict == Verdict::Pass, &report.phi) else {
        return Err(PerturbationError::NotQuasiTrivial);
    };
    let space = pert.space();
    let mut k1 = Expr::zero();
    for (i, (ci, pi)) in report.c.iter().zip(phi).enumerate() {
        let rix = space.jet(i, 1);
        k1 = &k1 + &(ci * &(&(&rix * &Expr::log(&rix)) - &rix));
        k1 = &k1 + &(pi * &rix);
    }
    let br = pert.bracket(pert.h0(), &k1)?;
    let mut checks = vec![total_derivative_check(
        "bracket-H0-K1-equals-H2",
        &(&br - pert.h2()),
        &space,
        zero,
    )];
    let logs: Vec<String> = br
        .atoms()
        .into_iter()
        .filter(|a| matches!(a, Symbol::Log(_)))
        .map(|a| Expr::symbol(a).to_string())
        .collect();
    checks.push(Check::fact(
        "log-free-bracket",
        logs.is_empty(),
        logs.join(", "),
    ));
    for b in 0..space.n() {
        let e = space.euler(&k1, b);
        let res = &space.degree_operator(&e) - &e;
        checks.push(Check::zero(format!("homogeneity[{}]", b + 1), &res, zero));
    }
    if let Some(bad) = checks.iter().find(|c| !c.passed) {
        return Err(PerturbationError::Internal {
            check: bad.name.clone(),
            residual: bad.residual.clone(),
        });
    }
    Ok(Generator {
        density: k1,
        c: report.c.clone(),
        phi: phi.clone(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn water_wave_fails_separation() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let h2 = ws.parse("(1/6)*r^3*v_x^2").unwrap();
        let pert =
            Perturbation::from_state(sys, chart, &Expr::zero(), &h2, ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.lambda_ii, vec![ws.parse("-3/2").unwrap(); 2]);
        assert_eq!(rep.c[0], ws.parse("(R1 - R2)^6/576").unwrap());
        let w = rep.witness.unwrap();
        assert_eq!(w.condition, "separated");
        assert!(w.expr.depends_on(&ws.lookup("R2").unwrap()));
        assert!(rep.phi.is_none());
    }

    #[test]
    fn zero_h2_passes_trivially() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let pert =
            Perturbation::new(sys, chart, Expr::zero(), Expr::zero(), ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(rep.c.iter().all(Expr::is_zero));
        assert!(rep.s.as_ref().unwrap().iter().flatten().all(Expr::is_zero));
        let g = quasi_trivialize(&pert, &rep, &zt).unwrap();
        assert!(g.density.is_zero());
    }

    #[test]
    fn canonical_round_trip_water_wave() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let p = |s: &str| ws.parse(s).unwrap();
        let c = vec![p("R1^2"), p("1")];
        let phi = vec![p("R1*R2^2 + R2"), p("R1^3 - 2*R2")];
        let h2 = build_h2_canonical(&chart, &c, &phi).unwrap();
        let pert =
            Perturbation::new(sys, chart.clone(), Expr::zero(), h2, ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert_eq!(rep.c, c);
        let s_in = s_from_phi(&chart, &phi);
        assert!(zt.is_zero(&(&rep.s_canonical[0][1] - &s_in[0][1])));
        let g = quasi_trivialize(&pert, &rep, &zt).unwrap();
        assert!(all_passed(&g.checks));
    }

    #[test]
    fn single_log_generator() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let p = |s: &str| ws.parse(s).unwrap();
        let h2 = build_h2_canonical(&chart, &[p("1"), p("0")], &[p("0"), p("0")]).unwrap();
        assert_eq!(h2, p("(3/2)*R1_x^2"));
        let pert = Perturbation::new(sys, chart, Expr::zero(), h2, ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        let g = quasi_trivialize(&pert, &rep, &zt).unwrap();
        // the cross term of {H0, ∫(R1x log R1x − R1x)} is cancelled by φ
        assert_eq!(rep.s.as_ref().unwrap()[0][1], p("1/(2*(R1 - R2))"));
        assert!(!g.phi[1].is_zero());
        let bare = p("R1_x*log(R1_x) - R1_x");
        let br = pert.bracket(pert.h0(), &bare).unwrap();
        assert!(!pert.space().is_total_derivative(&(&br - pert.h2()), &zt));
    }

    #[test]
    fn not_separated_c_rejected() {
        let (ws, _, chart) = water_wave();
        let p = |s: &str| ws.parse(s).unwrap();
        let err = build_h2_canonical(&chart, &[p("R2"), p("0")], &[p("0"), p("0")]).unwrap_err();
        assert_eq!(
            err,
            PerturbationError::NotSeparated {
                i: 1,
                var: "R2".into()
            }
        );
    }

    #[test]
    fn diagonal_three_component_round_trip() {
        let (ws, sys, chart) = diagonal(3);
        let zt = ZeroTester::new(&ws);
        let p = |s: &str| ws.parse(s).unwrap();
        let c = vec![p("R1^2 + 1"), p("2*R2"), p("R3^3")];
        let phi = vec![p("R2*R3"), p("R1^2*R3 + R2"), p("R1*R2^2")];
        let h2 = build_h2_canonical(&chart, &c, &phi).unwrap();
        let pert =
            Perturbation::new(sys, chart.clone(), Expr::zero(), h2, ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.witness);
        assert_eq!(rep.c, c);
        // λ_{i,j} = 0, so both conventions agree with the input
        let s_in = s_from_phi(&chart, &phi);
        for i in 0..3 {
            for j in 0..3 {
                assert!(zt.is_zero(&(&rep.s.as_ref().unwrap()[i][j] - &s_in[i][j])));
                assert!(zt.is_zero(&(&rep.s_canonical[i][j] - &s_in[i][j])));
            }
        }
        let g = quasi_trivialize(&pert, &rep, &zt).unwrap();
        assert!(all_passed(&g.checks));
    }

    #[test]
    fn cyclic_condition_fails_on_diagonal_base() {
        let (ws, sys, chart) = diagonal(3);
        let zt = ZeroTester::new(&ws);
        // d_12 = (λ1 − λ2) R3, other off-diagonal terms zero: s = 2 R3 dR1∧dR2 is not closed
        let h2 = ws.parse("2*(R1 - R2)*R3*R1_x*R2_x").unwrap();
        let pert = Perturbation::new(sys, chart, Expr::zero(), h2, ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.witness.unwrap().condition, "cyclic");
    }

    #[test]
    fn dtilde_transforms_to_chart_form() {
        let (ws, _, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let asm = ws.assumptions();
        let p = |s: &str| ws.parse(s).unwrap();
        let c = vec![p("R1^2"), p("3")];
        let s = s_from_phi(&chart, &[p("R2^2"), p("R1*R2")]);
        let dt = dtilde_from_generator_form(&chart, &c, &s, asm);
        let inv = chart.inverse_jacobian();
        let want = chart_d_from_generator_form(&chart, &c, &s);
        for i in 0..2 {
            for j in 0..2 {
                let mut dij = Expr::zero();
                for a in 0..2 {
                    for b in 0..2 {
                        dij = &dij
                            + &(&(&chart.to_riemann(&dt[a][b], asm) * &inv[a][i]) * &inv[b][j]);
                    }
                }
                assert!(zt.is_zero(&(&dij - &want[i][j])));
            }
        }
    }

    #[test]
    fn gauge_leaves_s_unchanged() {
        let (ws, _, chart) = diagonal(3);
        let p = |s: &str| ws.parse(s).unwrap();
        let phi = vec![p("R2*R3"), p("R1^2"), p("R1*R2")];
        let chi = p("R1^2*R2*R3 + R3^4");
        let r = chart.riemann_vars();
        let shifted: Vec<Expr> = phi.iter().zip(r).map(|(f, x)| f + &chi.diff(x)).collect();
        assert_eq!(s_from_phi(&chart, &phi), s_from_phi(&chart, &shifted));
    }
}
