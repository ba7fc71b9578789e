use super::first::{first_order_trivialize, TrivializeError, Trivializer};
use super::{Perturbation, PerturbationError};
use crate::jet::{poisson_bracket, HamiltonianOperator, JetSpace, LocalFunctional};
use crate::kernel::{rational, Expr, ZeroTester};

fn bracket(
    f: &Expr,
    g: &Expr,
    op: &HamiltonianOperator,
    space: &JetSpace,
) -> Result<Expr, PerturbationError> {
    if f.is_zero() || g.is_zero() {
        return Ok(Expr::zero());
    }
    let f = LocalFunctional::from_expr(f.clone(), space)?;
    let g = LocalFunctional::from_expr(g.clone(), space)?;
    Ok(poisson_bracket(&f, &g, op, space)?.density().clone())
}

/// `{A, K}` for ε-series, truncated at `order`.
fn series_bracket(
    a: &[Expr],
    k: &[Expr],
    op: &HamiltonianOperator,
    space: &JetSpace,
    order: usize,
) -> Result<Vec<Expr>, PerturbationError> {
    let mut out = vec![Expr::zero(); order + 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, kj) in k.iter().enumerate() {
            if i + j <= order {
                out[i + j] = &out[i + j] + &bracket(ai, kj, op, space)?;
            }
        }
    }
    Ok(out)
}

/// `H + ε{H, K} + (ε²/2){{H, K}, K}` with `H = Σ ε^j h[j]`, `K = Σ ε^j k[j]`,
/// truncated at `order`.
pub fn canonical_transform(
    h: &[Expr],
    k: &[Expr],
    op: &HamiltonianOperator,
    space: &JetSpace,
    order: usize,
) -> Result<Vec<Expr>, PerturbationError> {
    let mut out = vec![Expr::zero(); order + 1];
    for (j, hj) in h.iter().enumerate().take(order + 1) {
        out[j] = hj.clone();
    }
    if order == 0 {
        return Ok(out);
    }
    let b = series_bracket(h, k, op, space, order - 1)?;
    for (j, bj) in b.iter().enumerate() {
        out[j + 1] = &out[j + 1] + bj;
    }
    if order >= 2 {
        let c = series_bracket(&b, k, op, space, order - 2)?;
        for (j, cj) in c.iter().enumerate() {
            out[j + 2] = &out[j + 2] + &cj.scale(&rational(1, 2));
        }
    }
    Ok(out)
}

/// Removes `H1` with `K = −K0`: `H1' = 0`, `H2' = H2 − ½{H1, K0}`.
pub fn reduce_first_order(
    pert: &Perturbation,
    basis: &[Expr],
    zero: &ZeroTester,
) -> Result<(Perturbation, Trivializer), TrivializeError> {
    let t = first_order_trivialize(pert, basis, zero)?;
    let space = pert.space();
    let h = [pert.h0().clone(), pert.h1().clone(), pert.h2().clone()];
    let out = canonical_transform(&h, &[-&t.k0], &pert.operator(), &space, 2)?;
    if !space.is_total_derivative(&out[1], zero) {
        return Err(PerturbationError::Internal {
            check: "reduced-H1-vanishes".into(),
            residual: out[1].to_string(),
        }
        .into());
    }
    let reduced =
        pert.with_densities(Expr::zero(), out[2].clone(), zero.workspace().assumptions())?;
    Ok((reduced, t))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::second::{build_h2_canonical, quasi_trivialize, second_order_check};
    use super::*;

    #[test]
    fn zero_generator_is_identity() {
        let (ws, sys, chart) = water_wave();
        let pert =
            Perturbation::new(sys, chart, Expr::zero(), Expr::zero(), ws.assumptions()).unwrap();
        let h = [pert.h0().clone(), ws.parse("R1*R2_x").unwrap()];
        let out = canonical_transform(&h, &[], &pert.operator(), &pert.space(), 2).unwrap();
        assert_eq!(out, vec![h[0].clone(), h[1].clone(), Expr::zero()]);
    }

    #[test]
    fn first_order_unrolls_definition() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let pert =
            Perturbation::new(sys, chart, Expr::zero(), Expr::zero(), ws.assumptions()).unwrap();
        let g = ws.parse("R1^2*R2").unwrap();
        let out = canonical_transform(
            &[pert.h0().clone()],
            std::slice::from_ref(&g),
            &pert.operator(),
            &pert.space(),
            1,
        )
        .unwrap();
        let want = pert.bracket(pert.h0(), &g).unwrap();
        assert!(pert.space().is_total_derivative(&(&out[1] - &want), &zt));
    }

    #[test]
    fn generator_removes_h2() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let p = |s: &str| ws.parse(s).unwrap();
        let h2 = build_h2_canonical(&chart, &[p("R1"), p("2")], &[p("0"), p("R1^2")]).unwrap();
        let pert = Perturbation::new(sys, chart, Expr::zero(), h2, ws.assumptions()).unwrap();
        let rep = second_order_check(&pert, &zt).unwrap();
        let g = quasi_trivialize(&pert, &rep, &zt).unwrap();
        let h = [pert.h0().clone(), Expr::zero(), pert.h2().clone()];
        let out = canonical_transform(
            &h,
            &[Expr::zero(), -&g.density],
            &pert.operator(),
            &pert.space(),
            2,
        )
        .unwrap();
        assert_eq!(out[0], *pert.h0());
        assert!(pert.space().is_total_derivative(&out[1], &zt));
        assert!(pert.space().is_total_derivative(&out[2], &zt));
    }

    #[test]
    fn first_order_reduction() {
        let (ws, sys, chart) = water_wave();
        let zt = ZeroTester::new(&ws);
        let asm = ws.assumptions();
        let probe = Perturbation::new(sys, chart, Expr::zero(), Expr::zero(), asm).unwrap();
        let k0 = ws.parse("R1^2*R2 + R2^3").unwrap();
        let h1 = probe.bracket(probe.h0(), &k0).unwrap();
        let h2 = ws.parse("R1*R1_x*R2_x").unwrap();
        let pert = probe.with_densities(h1.clone(), h2.clone(), asm).unwrap();
        let basis: Vec<Expr> = ["R1^3", "R1^2*R2", "R1*R2^2", "R2^3"]
            .iter()
            .map(|s| ws.parse(s).unwrap())
            .collect();
        let (reduced, t) = reduce_first_order(&pert, &basis, &zt).unwrap();
        assert!(reduced.h1().is_zero());
        let half = probe.bracket(&h1, &t.k0).unwrap().scale(&rational(1, 2));
        let want = &h2 - &half;
        assert!(probe
            .space()
            .is_total_derivative(&(reduced.h2() - &want), &zt));
    }
}
