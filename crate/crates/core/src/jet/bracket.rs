use num_traits::Zero;

use super::{JetError, JetSpace, LocalFunctional, Metric};
use crate::kernel::Expr;

/// The operator `η ∂_x` written in the coordinates of a jet space.
///
/// In a chart `u = u(v)` with Jacobian `J_{iα} = ∂u_i/∂v^α` (expressed in
/// `u`) it acts as `(P ξ)_i = J_{iα} η^{αβ} ∂_x (J_{jβ} ξ_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianOperator {
    metric: Metric,
    jacobian: Option<Vec<Vec<Expr>>>,
}

impl HamiltonianOperator {
    /// `η ∂_x` in the state coordinates themselves.
    pub fn constant(metric: Metric) -> Self {
        HamiltonianOperator {
            metric,
            jacobian: None,
        }
    }

    /// `η ∂_x` transported to a chart with Jacobian `jac[i][α] = ∂u_i/∂v^α`.
    pub fn in_chart(metric: Metric, jac: Vec<Vec<Expr>>) -> Self {
        let n = metric.dim();
        assert!(jac.len() == n && jac.iter().all(|r| r.len() == n));
        HamiltonianOperator {
            metric,
            jacobian: Some(jac),
        }
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn jacobian(&self) -> Option<&[Vec<Expr>]> {
        self.jacobian.as_deref()
    }

    fn j(&self, i: usize, a: usize) -> Expr {
        match &self.jacobian {
            Some(m) => m[i][a].clone(),
            None if i == a => Expr::one(),
            None => Expr::zero(),
        }
    }

    /// `P ξ`.
    pub fn apply(&self, space: &JetSpace, xi: &[Expr]) -> Vec<Expr> {
        let n = self.metric.dim();
        // w_β = Σ_j J_{jβ} ξ_j, then ∂_x
        let dw: Vec<Expr> = (0..n)
            .map(|b| {
                let w: Expr = (0..n).map(|j| &self.j(j, b) * &xi[j]).sum();
                space.total_x_derivative(&w)
            })
            .collect();
        let eta_dw: Vec<Expr> = (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&b| !self.metric.upper(a, b).is_zero())
                    .map(|b| dw[b].scale(self.metric.upper(a, b)))
                    .sum()
            })
            .collect();
        (0..n)
            .map(|i| (0..n).map(|a| &self.j(i, a) * &eta_dw[a]).sum())
            .collect()
    }
}

/// `{F, G} = ∫ δF/δu_i (P δG/δu)_i dx`.
pub fn poisson_bracket(
    f: &LocalFunctional,
    g: &LocalFunctional,
    op: &HamiltonianOperator,
    space: &JetSpace,
) -> Result<LocalFunctional, JetError> {
    let ef: Vec<Expr> = (0..space.n())
        .map(|b| f.variational_derivative(space, b))
        .collect::<Result<_, _>>()?;
    let eg: Vec<Expr> = (0..space.n())
        .map(|b| g.variational_derivative(space, b))
        .collect::<Result<_, _>>()?;
    let peg = op.apply(space, &eg);
    let density: Expr = ef.iter().zip(&peg).map(|(a, b)| a * b).sum();
    LocalFunctional::from_expr(density, space)
}

/// Right-hand sides `u_t = P δH/δu` of the flow of `H = Σ ε^j H_j`, as
/// `rhs[α][j]` for `j ≤ order`.
pub fn hamiltonian_flow(
    h: &[LocalFunctional],
    op: &HamiltonianOperator,
    space: &JetSpace,
    order: usize,
) -> Result<Vec<Vec<Expr>>, JetError> {
    let mut out = vec![Vec::new(); space.n()];
    for hj in h.iter().take(order + 1) {
        let e: Vec<Expr> = (0..space.n())
            .map(|b| hj.variational_derivative(space, b))
            .collect::<Result<_, _>>()?;
        for (a, rhs) in op.apply(space, &e).into_iter().enumerate() {
            out[a].push(rhs);
        }
    }
    for rhs in &mut out {
        rhs.resize(order + 1, Expr::zero());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Chart;
    use crate::kernel::{VarKind, Workspace, ZeroTester};

    fn water_wave() -> (Workspace, JetSpace, HamiltonianOperator) {
        let (ws, v) = Workspace::with_vars(&["r", "v"], VarKind::State);
        let op = HamiltonianOperator::constant(Metric::from_integers(&[&[0, 1], &[1, 0]]).unwrap());
        (ws, JetSpace::new(v, Chart::State), op)
    }

    fn lf(ws: &Workspace, sp: &JetSpace, s: &str) -> LocalFunctional {
        LocalFunctional::from_expr(ws.parse(s).unwrap(), sp).unwrap()
    }

    #[test]
    fn water_wave_flow() {
        let (ws, sp, op) = water_wave();
        let h = [
            lf(&ws, &sp, "-(1/2)*r*v^2 - (1/2)*r^2"),
            LocalFunctional::zero(&sp),
            lf(&ws, &sp, "(1/6)*r^3*v_x^2"),
        ];
        let rhs = hamiltonian_flow(&h, &op, &sp, 2).unwrap();
        assert_eq!(rhs[0][0], ws.parse("-r_x*v - r*v_x").unwrap());
        assert_eq!(rhs[1][0], ws.parse("-r_x - v*v_x").unwrap());
        let r2 = sp.total_x_derivative(&ws.parse("-r^2*r_x*v_x - (1/3)*r^3*v_xx").unwrap());
        assert_eq!(rhs[0][2], r2);
        assert_eq!(
            rhs[1][2],
            sp.total_x_derivative(&ws.parse("(1/2)*r^2*v_x^2").unwrap())
        );
        let rhs0 = hamiltonian_flow(&h, &op, &sp, 0).unwrap();
        assert_eq!(rhs0[0].len(), 1);
    }

    #[test]
    fn conserved_quantities_commute_with_h0() {
        let (ws, sp, op) = water_wave();
        let zt = ZeroTester::new(&ws);
        let h0 = lf(&ws, &sp, "-(1/2)*r*v^2 - (1/2)*r^2");
        for f in [
            "r",
            "r*v",
            "v",
            "(1/2)*r*v^2 + (1/2)*r^2",
            "(1/2)*v^2 + r*log(r)",
        ] {
            let b = poisson_bracket(&lf(&ws, &sp, f), &h0, &op, &sp).unwrap();
            assert!(sp.is_total_derivative(b.density(), &zt), "{f}");
        }
        let b = poisson_bracket(&lf(&ws, &sp, "r^2*v"), &h0, &op, &sp).unwrap();
        assert!(!sp.is_total_derivative(b.density(), &zt));
    }

    #[test]
    fn translation_flow() {
        let (ws, sp, op) = water_wave();
        // η_{αβ} v^α v^β / 2 with η antidiagonal is r v
        let rhs = hamiltonian_flow(&[lf(&ws, &sp, "r*v")], &op, &sp, 0).unwrap();
        assert_eq!(rhs[0][0], ws.parse("r_x").unwrap());
        assert_eq!(rhs[1][0], ws.parse("v_x").unwrap());
    }
}
