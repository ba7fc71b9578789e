use super::{linear_coefficients, Perturbation, PerturbationError};
use crate::hydro::matrix::ExprMatrix;
use crate::hydro::RiemannChart;
use crate::kernel::{Assumptions, Expr, ZeroTester};
use crate::linalg::{combine, solve_symbolic};
use crate::verdict::{all_passed, Check, Verdict};

/// `p_i = p̃_α ∂v^α/∂R_i`, with `p̃` given in state variables.
pub fn to_chart_first(chart: &RiemannChart, p_tilde: &[Expr], asm: &Assumptions) -> Vec<Expr> {
    let inv = chart.inverse_jacobian();
    (0..chart.n())
        .map(|i| {
            (0..chart.n())
                .map(|a| &chart.to_riemann(&p_tilde[a], asm) * &inv[a][i])
                .sum()
        })
        .collect()
}

/// `p̃_α = Σ_i p_i ∂R_i/∂v^α`, in state variables.
pub fn p_tilde(chart: &RiemannChart, p: &[Expr], asm: &Assumptions) -> Vec<Expr> {
    let grad = chart.gradient();
    (0..chart.n())
        .map(|a| {
            (0..chart.n())
                .map(|i| &chart.to_state(&p[i], asm) * &grad[i][a])
                .sum()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderReport {
    pub verdict: Verdict,
    pub p: Vec<Expr>,
    /// `θ_ij = p_{i,j} − p_{j,i}`.
    pub theta: ExprMatrix,
    /// `ω_ij = θ_ij/(λ_i − λ_j)`, zero on the diagonal.
    pub omega: ExprMatrix,
    /// One check per ordered triple of distinct indices.
    pub checks: Vec<Check>,
}

fn theta_omega(pert: &Perturbation, p: &[Expr]) -> (ExprMatrix, ExprMatrix) {
    let n = pert.n();
    let chart = pert.chart();
    let r = chart.riemann_vars();
    let mut theta = vec![vec![Expr::zero(); n]; n];
    let mut omega = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            theta[i][j] = &p[i].diff(&r[j]) - &p[j].diff(&r[i]);
            omega[i][j] = &theta[i][j] / &(chart.lambda(i) - chart.lambda(j));
        }
    }
    (theta, omega)
}

/// `ω_{ij,k} − ω_{ik,j} − (a_ij ω_ik + a_ji ω_jk − a_ik ω_ij − a_ki ω_kj)`.
pub(crate) fn triple_residual(
    chart: &RiemannChart,
    omega: &ExprMatrix,
    i: usize,
    j: usize,
    k: usize,
) -> Expr {
    let r = chart.riemann_vars();
    let a = |x: usize, y: usize| chart.a(x, y).expect("distinct speeds checked");
    let lhs = &omega[i][j].diff(&r[k]) - &omega[i][k].diff(&r[j]);
    let rhs = &(&(&a(i, j) * &omega[i][k]) + &(&a(j, i) * &omega[j][k]))
        - &(&(&a(i, k) * &omega[i][j]) + &(&a(k, i) * &omega[k][j]));
    &lhs - &rhs
}

pub fn first_order_check(
    pert: &Perturbation,
    zero: &ZeroTester,
) -> Result<FirstOrderReport, PerturbationError> {
    pert.check_distinct(zero)?;
    let n = pert.n();
    let p = linear_coefficients(pert.h1(), &pert.space())?;
    let (theta, omega) = theta_omega(pert, &p);
    let mut checks = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || j == k || i == k {
                    continue;
                }
                let res = triple_residual(pert.chart(), &omega, i, j, k);
                checks.push(Check::zero(
                    format!("triple[{}][{}][{}]", i + 1, j + 1, k + 1),
                    &res,
                    zero,
                ));
            }
        }
    }
    let verdict = if checks.is_empty() {
        Verdict::Vacuous
    } else {
        Verdict::from_bool(all_passed(&checks))
    };
    Ok(FirstOrderReport {
        verdict,
        p,
        theta,
        omega,
        checks,
    })
}

/// `K0 = ∫ k0 dx` with `{H0, K0} = H1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trivializer {
    pub k0: Expr,
    pub k0_state: Expr,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrivializeError {
    #[error("no k0 in the span of the {size} basis functions solves the first-order equations")]
    BasisInsufficient { size: usize },
    #[error("the first-order condition fails, H1 is not trivial")]
    NotIntegrable,
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
}

/// Solves `ω_ij = −(k0_{,ij} + a_ij k0_{,i} + a_ji k0_{,j})` for `k0` in the
/// span of `basis` (state or Riemann variables), then verifies the bracket.
pub fn first_order_trivialize(
    pert: &Perturbation,
    basis: &[Expr],
    zero: &ZeroTester,
) -> Result<Trivializer, TrivializeError> {
    let report = first_order_check(pert, zero)?;
    if !report.verdict.is_ok() {
        return Err(TrivializeError::NotIntegrable);
    }
    let asm = zero.workspace().assumptions();
    let chart = pert.chart();
    let r = chart.riemann_vars();
    let n = pert.n();
    let k0 = if pert.h1().is_zero() {
        Expr::zero()
    } else {
        let basis: Vec<Expr> = basis.iter().map(|b| chart.to_riemann(b, asm)).collect();
        let op = |f: &Expr, i: usize, j: usize| -> Expr {
            let a_ij = chart.a(i, j).expect("distinct speeds checked");
            let a_ji = chart.a(j, i).expect("distinct speeds checked");
            &(&f.diff(&r[i]).diff(&r[j]) + &(&a_ij * &f.diff(&r[i]))) + &(&a_ji * &f.diff(&r[j]))
        };
        let mut coeffs = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                coeffs.push(basis.iter().map(|b| op(b, i, j)).collect());
                rhs.push(-&report.omega[i][j]);
            }
        }
        let sol = solve_symbolic(&coeffs, &rhs, basis.len())
            .ok_or(TrivializeError::BasisInsufficient { size: basis.len() })?;
        combine(&sol.particular, &basis)
    };
    let br = pert
        .bracket(pert.h0(), &k0)
        .map_err(PerturbationError::from)?;
    let check = super::total_derivative_check(
        "bracket-H0-K0-equals-H1",
        &(&br - pert.h1()),
        &pert.space(),
        zero,
    );
    if !check.passed {
        // the ω equations hold but the bracket does not: a basis gap when
        // n = 1 (no equations), otherwise an internal inconsistency
        if n == 1 {
            return Err(TrivializeError::BasisInsufficient { size: basis.len() });
        }
        return Err(PerturbationError::Internal {
            check: check.name,
            residual: check.residual,
        }
        .into());
    }
    Ok(Trivializer {
        k0_state: chart.to_state(&k0, asm),
        k0,
        checks: vec![check],
    })
}
