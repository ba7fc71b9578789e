//! Dispersionless systems `v_t = A(v) v_x` with `A = η ∂∂h0`.

mod chart;
mod claws;
pub mod matrix;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::jet::{Chart, HamiltonianOperator, JetSpace, Metric};
use crate::kernel::{Expr, Var, ZeroTester};
use crate::verdict::Check;

pub use chart::{
    solve_chart_n2, tsarev_check, verify_chart, ChartError, ChartReport, RiemannChart, TsarevReport,
};
pub use claws::{check_conserved0, solve_claws0, ClawError, Conserved0Report};

pub type Tensor3 = Vec<Vec<Vec<Expr>>>;

/// `η`, `h0` and the derived velocity matrix.
#[derive(Clone, Debug)]
pub struct HydroSystem {
    space: JetSpace,
    metric: Metric,
    h0: Expr,
    a: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HydroError {
    #[error("metric is {metric}x{metric} but there are {vars} state variables")]
    Dimension { metric: usize, vars: usize },
}

impl HydroSystem {
    pub fn new(fields: Vec<Var>, metric: Metric, h0: Expr) -> Result<Self, HydroError> {
        if fields.len() != metric.dim() {
            return Err(HydroError::Dimension {
                metric: metric.dim(),
                vars: fields.len(),
            });
        }
        let a = velocity_matrix(&h0, &metric, &fields);
        Ok(HydroSystem {
            space: JetSpace::new(fields, Chart::State),
            metric,
            h0,
            a,
        })
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn fields(&self) -> &[Var] {
        self.space.fields()
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn h0(&self) -> &Expr {
        &self.h0
    }

    /// `A^α_γ`, row `α`.
    pub fn velocity(&self) -> &[Vec<Expr>] {
        &self.a
    }

    pub fn operator(&self) -> HamiltonianOperator {
        HamiltonianOperator::constant(self.metric.clone())
    }

    /// `η_{αρ} A^ρ_β = η_{βρ} A^ρ_α` for all pairs.
    pub fn eta_symmetry(&self, zero: &ZeroTester) -> Vec<Check> {
        let n = self.n();
        let lowered = |a: usize, b: usize| -> Expr {
            (0..n)
                .filter(|&r| !self.metric.lower(a, r).is_zero())
                .map(|r| self.a[r][b].scale(self.metric.lower(a, r)))
                .sum()
        };
        let mut out = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                out.push(Check::zero(
                    format!("eta-symmetry[{a}][{b}]"),
                    &(&lowered(a, b) - &lowered(b, a)),
                    zero,
                ));
            }
        }
        out
    }
}

/// `A^α_γ = η^{αβ} ∂_β ∂_γ h0`.
pub fn velocity_matrix(h0: &Expr, metric: &Metric, fields: &[Var]) -> Vec<Vec<Expr>> {
    let n = fields.len();
    let hess: Vec<Vec<Expr>> = fields
        .iter()
        .map(|b| {
            let hb = h0.diff(b);
            fields.iter().map(|g| hb.diff(g)).collect()
        })
        .collect();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|g| {
                    (0..n)
                        .filter(|&b| !metric.upper(a, b).is_zero())
                        .map(|b| hess[b][g].scale(metric.upper(a, b)))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// `H_{αβγ} = (A_{αρσ}A_{βφ}A_{γψ} + cyclic) A^ρ_ν δ^{σνψφ}` with lower-index
/// `A` the derivatives of `h0`.
pub fn haantjes_tensor(sys: &HydroSystem) -> Tensor3 {
    let n = sys.n();
    let f = sys.fields();
    let d1: Vec<Expr> = f.iter().map(|x| sys.h0.diff(x)).collect();
    let a2: Vec<Vec<Expr>> = (0..n)
        .map(|i| f.iter().map(|x| d1[i].diff(x)).collect())
        .collect();
    let a3: Tensor3 = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| f.iter().map(|x| a2[i][j].diff(x)).collect())
                .collect()
        })
        .collect();
    let up = sys.velocity();
    // W^{ρσψφ} = Σ_ν A^ρ_ν δ^{σνψφ}
    let mut w = vec![vec![vec![vec![Expr::zero(); n]; n]; n]; n];
    for rho in 0..n {
        for sigma in 0..n {
            for psi in 0..n {
                for phi in 0..n {
                    w[rho][sigma][psi][phi] = (0..n)
                        .filter_map(|nu| {
                            let d = sys.metric.delta(sigma, nu, psi, phi);
                            (!d.is_zero()).then(|| up[rho][nu].scale(&d))
                        })
                        .sum();
                }
            }
        }
    }
    // X_a^{ψφ} = Σ_{ρσ} A_{aρσ} W^{ρσψφ}
    let x: Tensor3 = (0..n)
        .map(|a| {
            (0..n)
                .map(|psi| {
                    (0..n)
                        .map(|phi| {
                            let mut acc = Expr::zero();
                            for rho in 0..n {
                                for sigma in 0..n {
                                    let wv = &w[rho][sigma][psi][phi];
                                    if !wv.is_zero() && !a3[a][rho][sigma].is_zero() {
                                        acc = &acc + &(&a3[a][rho][sigma] * wv);
                                    }
                                }
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let t = |a: usize, b: usize, c: usize| -> Expr {
        let mut acc = Expr::zero();
        for psi in 0..n {
            for phi in 0..n {
                let xv = &x[a][psi][phi];
                if xv.is_zero() {
                    continue;
                }
                acc = &acc + &(&(xv * &a2[b][phi]) * &a2[c][psi]);
            }
        }
        acc
    };
    (0..n)
        .map(|al| {
            (0..n)
                .map(|be| {
                    (0..n)
                        .map(|ga| &(&t(al, be, ga) + &t(be, ga, al)) + &t(ga, al, be))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Verdict of the Haantjes test with the first nonzero entry as witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaantjesReport {
    pub integrable: bool,
    pub witness: Option<((usize, usize, usize), String)>,
    pub checks: Vec<Check>,
}

pub fn is_hydro_integrable(sys: &HydroSystem, zero: &ZeroTester) -> HaantjesReport {
    let h = haantjes_tensor(sys);
    let n = sys.n();
    let mut checks = Vec::new();
    let mut witness = None;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let ch = Check::zero(format!("haantjes[{a}][{b}][{c}]"), &h[a][b][c], zero);
                if !ch.passed && witness.is_none() {
                    witness = Some(((a, b, c), ch.residual.clone()));
                }
                checks.push(ch);
            }
        }
    }
    HaantjesReport {
        integrable: witness.is_none(),
        witness,
        checks,
    }
}
