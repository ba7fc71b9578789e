//! Hamiltonian perturbations `H0 + ε H1 + ε² H2` of an integrable
//! hydrodynamic system, analysed in its Riemann chart.

mod extend;
mod first;
mod second;
mod transform;

use crate::hydro::matrix::ExprMatrix;
use crate::hydro::{HydroSystem, RiemannChart};
use crate::jet::{HamiltonianOperator, JetError, JetSpace, LocalFunctional};
use crate::kernel::{Assumptions, Expr, ZeroTester};
use crate::verdict::Check;

pub use extend::{extend_claw, second_order_extension_solve, ExtendError, Extension};
pub use first::{
    first_order_check, first_order_trivialize, p_tilde, to_chart_first, FirstOrderReport,
    TrivializeError, Trivializer,
};
pub use second::{
    build_h2_canonical, chart_d_from_generator_form, dtilde_from_generator_form, quasi_trivialize,
    s_from_phi, second_order_check, Generator, SecondOrderReport, Witness,
};
pub use transform::{canonical_transform, reduce_first_order};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerturbationError {
    #[error("H{order} density is not homogeneous of jet degree {order}: found degrees {found:?}")]
    NotHomogeneous { order: usize, found: Vec<i64> },
    #[error("density is not a quadratic form in first jets: {0}")]
    NotQuadratic(String),
    #[error("speeds λ{i} and λ{j} coincide identically")]
    CoincidentSpeeds { i: usize, j: usize },
    #[error("∂λ{i}/∂R{i} vanishes identically")]
    FlatSpeed { i: usize },
    #[error("C{i} depends on {var}")]
    NotSeparated { i: usize, var: String },
    #[error("cannot integrate s_{i}{j} = {s}: {reason}")]
    Quadrature {
        i: usize,
        j: usize,
        s: String,
        reason: String,
    },
    #[error("second-order analysis did not pass, no generator exists")]
    NotQuasiTrivial,
    #[error("internal consistency check `{check}` failed with residual {residual}")]
    Internal { check: String, residual: String },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// A truncated perturbation with `H1`, `H2` stored as Riemann-chart densities.
#[derive(Clone, Debug)]
pub struct Perturbation {
    sys: HydroSystem,
    chart: RiemannChart,
    h0: Expr,
    h1: Expr,
    h2: Expr,
}

impl Perturbation {
    /// `h1`, `h2` in Riemann jets.
    pub fn new(
        sys: HydroSystem,
        chart: RiemannChart,
        h1: Expr,
        h2: Expr,
        asm: &Assumptions,
    ) -> Result<Self, PerturbationError> {
        let space = chart.riemann_space();
        for (order, h) in [(1, &h1), (2, &h2)] {
            if h.is_zero() {
                continue;
            }
            let parts = space.degree_decompose(h)?;
            let found: Vec<i64> = parts.keys().copied().collect();
            if found != [order as i64] {
                return Err(PerturbationError::NotHomogeneous { order, found });
            }
        }
        let h0 = chart.to_riemann(sys.h0(), asm);
        Ok(Perturbation {
            sys,
            chart,
            h0,
            h1,
            h2,
        })
    }

    /// `h1`, `h2` in state jets.
    pub fn from_state(
        sys: HydroSystem,
        chart: RiemannChart,
        h1: &Expr,
        h2: &Expr,
        asm: &Assumptions,
    ) -> Result<Self, PerturbationError> {
        let h1 = chart.density_to_riemann(h1, asm);
        let h2 = chart.density_to_riemann(h2, asm);
        Perturbation::new(sys, chart, h1, h2, asm)
    }

    pub fn with_densities(
        &self,
        h1: Expr,
        h2: Expr,
        asm: &Assumptions,
    ) -> Result<Self, PerturbationError> {
        Perturbation::new(self.sys.clone(), self.chart.clone(), h1, h2, asm)
    }

    pub fn sys(&self) -> &HydroSystem {
        &self.sys
    }

    pub fn chart(&self) -> &RiemannChart {
        &self.chart
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    /// `h0(v(R))`.
    pub fn h0(&self) -> &Expr {
        &self.h0
    }

    pub fn h1(&self) -> &Expr {
        &self.h1
    }

    pub fn h2(&self) -> &Expr {
        &self.h2
    }

    pub fn space(&self) -> JetSpace {
        self.chart.riemann_space()
    }

    pub fn operator(&self) -> HamiltonianOperator {
        self.chart.operator(self.sys.metric())
    }

    pub fn functional(&self, density: &Expr) -> Result<LocalFunctional, JetError> {
        LocalFunctional::from_expr(density.clone(), &self.space())
    }

    /// `{F, G}` in the Riemann chart, as a density.
    pub fn bracket(&self, f: &Expr, g: &Expr) -> Result<Expr, JetError> {
        let space = self.space();
        let br = crate::jet::poisson_bracket(
            &self.functional(f)?,
            &self.functional(g)?,
            &self.operator(),
            &space,
        )?;
        Ok(br.density().clone())
    }

    /// `λ_i − λ_j` for every pair must be nonzero.
    fn check_distinct(&self, zero: &ZeroTester) -> Result<(), PerturbationError> {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if zero.is_zero(&(self.chart.lambda(i) - self.chart.lambda(j))) {
                    return Err(PerturbationError::CoincidentSpeeds { i: i + 1, j: j + 1 });
                }
            }
        }
        Ok(())
    }
}

/// `p_i` with `h1 = Σ p_i R_i,x`.
pub fn linear_coefficients(h1: &Expr, space: &JetSpace) -> Result<Vec<Expr>, PerturbationError> {
    let p: Vec<Expr> = (0..space.n())
        .map(|i| h1.diff(&space.fields()[i].jet(1)))
        .collect();
    let rest = h1
        - &(0..space.n())
            .map(|i| &p[i] * &space.jet(i, 1))
            .sum::<Expr>();
    if !rest.is_zero() || p.iter().any(|c| space.max_order(c) > 0) {
        return Err(PerturbationError::NotQuadratic(h1.to_string()));
    }
    Ok(p)
}

/// Symmetric `d_ij` with `h2 ≅ Σ d_ij R_i,x R_j,x` modulo total derivatives;
/// terms linear in second jets are integrated by parts first.
pub fn quadratic_coefficients(
    h2: &Expr,
    space: &JetSpace,
) -> Result<ExprMatrix, PerturbationError> {
    let n = space.n();
    let mut h = h2.clone();
    for i in 0..n {
        let xx = space.fields()[i].jet(2);
        let g = h.diff(&xx);
        if g.is_zero() {
            continue;
        }
        if space.max_order(&g) > 0 {
            return Err(PerturbationError::NotQuadratic(h2.to_string()));
        }
        // g u_xx = ∂x(g u_x) − ∂x(g) u_x
        h = &(&h - &(&g * &Expr::var(&xx))) - &(&space.total_x_derivative(&g) * &space.jet(i, 1));
    }
    let half = crate::kernel::rational(1, 2);
    let d: ExprMatrix = (0..n)
        .map(|i| {
            let hi = h.diff(&space.fields()[i].jet(1));
            (0..n)
                .map(|j| hi.diff(&space.fields()[j].jet(1)).scale(&half))
                .collect()
        })
        .collect();
    let mut rebuilt = Expr::zero();
    for i in 0..n {
        for j in 0..n {
            rebuilt = &rebuilt + &(&d[i][j] * &(&space.jet(i, 1) * &space.jet(j, 1)));
        }
    }
    if !(&h - &rebuilt).is_zero() || d.iter().flatten().any(|c| space.max_order(c) > 0) {
        return Err(PerturbationError::NotQuadratic(h2.to_string()));
    }
    Ok(d)
}

/// Passes when `density` is a total x-derivative; the residual is the first
/// nonvanishing Euler derivative.
pub fn total_derivative_check(
    name: impl Into<String>,
    density: &Expr,
    space: &JetSpace,
    zero: &ZeroTester,
) -> Check {
    let name = name.into();
    let mut last = None;
    for b in 0..space.n() {
        let e = space.euler(density, b);
        let c = Check::zero(name.clone(), &e, zero);
        if !c.passed {
            return c;
        }
        last = Some(c);
    }
    last.unwrap_or_else(|| Check::fact(name, true, "0"))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::jet::Metric;
    use crate::kernel::{VarKind, Workspace};

    /// Water-wave system with the chart `R = v/2 ± √r`.
    pub fn water_wave() -> (Workspace, HydroSystem, RiemannChart) {
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

    /// `h0 = Σ v_i³/6`, `η = 1`, identity chart, `λ_i = R_i`.
    pub fn diagonal(n: usize) -> (Workspace, HydroSystem, RiemannChart) {
        let names: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let (mut ws, u) = Workspace::with_vars(&refs, VarKind::State);
        let r: Vec<_> = (1..=n)
            .map(|i| ws.declare(&format!("R{i}"), VarKind::Riemann).unwrap())
            .collect();
        // distinct speeds on the sample box
        for i in 1..n {
            ws.assume(&format!("R{} > R{}", i + 1, i)).unwrap();
            ws.assume(&format!("u{} > u{}", i + 1, i)).unwrap();
        }
        let h0: Expr = u
            .iter()
            .map(|x| Expr::var(x).pow(3).scale(&crate::kernel::rational(1, 6)))
            .sum();
        let sys = HydroSystem::new(u.clone(), Metric::identity(n), h0).unwrap();
        let chart = RiemannChart::new(
            u.clone(),
            r.clone(),
            u.iter().map(Expr::var).collect(),
            r.iter().map(Expr::var).collect(),
            r.iter().map(Expr::var).collect(),
            ws.assumptions(),
        )
        .unwrap();
        (ws, sys, chart)
    }
}
