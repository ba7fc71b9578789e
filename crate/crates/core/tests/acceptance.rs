use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hamperturb::casebook::{
    run_synthetic_integrable_case, run_waterwave_case, WATERWAVE, WATERWAVE_DENSITIES,
};
use hamperturb::hydro::{
    check_conserved0, is_hydro_integrable, solve_claws0, verify_chart, RiemannChart,
};
use hamperturb::jet::{poisson_bracket, HamiltonianOperator, JetSpace, LocalFunctional, Metric};
use hamperturb::kernel::{Expr, Var, VarKind, Workspace, ZeroTester};
use hamperturb::manifest::{monomial_basis, Manifest, Problem};
use hamperturb::perturbation::{
    first_order_check, first_order_trivialize, quadratic_coefficients, second_order_check,
    second_order_extension_solve, Perturbation,
};
use hamperturb::verdict::Verdict;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn waterwave() -> (Problem, RiemannChart) {
    let p = Manifest::from_toml(WATERWAVE).unwrap().build(None).unwrap();
    let c = p.chart.as_ref().unwrap();
    let chart = RiemannChart::new(
        p.sys.fields().to_vec(),
        p.riemann.clone(),
        c.invariants.clone(),
        c.inverse.clone(),
        c.lambda.clone(),
        p.ws.assumptions(),
    )
    .unwrap();
    (p, chart)
}

/// Evaluates with base variables and jets looked up by `(name, order)`.
fn eval(e: &Expr, point: &[(&str, u32, f64)]) -> f64 {
    let look = |v: &Var| {
        point
            .iter()
            .find(|(n, o, _)| *n == v.name() && *o == v.order())
            .map(|t| t.2)
    };
    e.eval_f64(&look)
        .expect("expression defined at the sample point")
        .0
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Haantjes, chart, speeds and their self-derivatives; the chart is also
/// checked by a floating-point left-eigenvector oracle.
fn criterion_1() -> Outcome {
    let (p, chart) = waterwave();
    let zt = ZeroTester::new(&p.ws);
    let h = is_hydro_integrable(&p.sys, &zt);
    ensure(
        h.integrable && h.witness.is_none(),
        "Haantjes tensor does not vanish",
    )?;
    ensure(
        verify_chart(&p.sys, &chart, &zt).verdict == Verdict::Pass,
        "chart not verified",
    )?;
    let want = ["-(3/2)*R1 - (1/2)*R2", "-(1/2)*R1 - (3/2)*R2"];
    for (i, w) in want.iter().enumerate() {
        ensure(
            chart.lambda(i) == &p.ws.parse(w).unwrap(),
            format!("λ{} = {}", i + 1, chart.lambda(i)),
        )?;
        let lii = chart.lambda_deriv(i, i);
        ensure(
            lii == p.ws.parse("-3/2").unwrap(),
            format!("λ{0},{0} = {lii}", i + 1),
        )?;
    }
    // V = η Hess(h0) = [[-v, -r], [-1, -v]]; ∇R_i V = λ_i ∇R_i with R_i = v/2 ± √r
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let r: f64 = rng.gen_range(0.3..4.0);
        let v: f64 = rng.gen_range(-2.0..2.0);
        let s = r.sqrt();
        let pt = [("r", 0, r), ("v", 0, v)];
        for (sign, idx) in [(1.0, 0), (-1.0, 1)] {
            let grad = [sign / (2.0 * s), 0.5];
            let left = [-v * grad[0] - grad[1], -r * grad[0] - v * grad[1]];
            let r1 = v / 2.0 + s;
            let r2 = v / 2.0 - s;
            let lam_oracle = if idx == 0 {
                -1.5 * r1 - 0.5 * r2
            } else {
                -0.5 * r1 - 1.5 * r2
            };
            ensure(
                close(left[0], lam_oracle * grad[0]) && close(left[1], lam_oracle * grad[1]),
                format!("eigen-oracle fails at r={r}, v={v}"),
            )?;
            let lam_state = chart.to_state(chart.lambda(idx), p.ws.assumptions());
            ensure(
                close(eval(&lam_state, &pt), lam_oracle),
                "λ in state variables disagrees with oracle",
            )?;
            let inv = eval(&chart.forward()[idx], &pt);
            ensure(
                close(inv, if idx == 0 { r1 } else { r2 }),
                "invariant disagrees with oracle",
            )?;
        }
    }
    Ok("Haantjes ≡ 0; R = v/2 ± √r; λ and λ_ii = -3/2 confirmed; 20-point eigen-oracle".into())
}

/// Non-integrability witness and the chart coefficient of h2.
fn criterion_2() -> Outcome {
    let (p, chart) = waterwave();
    let zt = ZeroTester::new(&p.ws);
    let pert = Perturbation::from_state(
        p.sys.clone(),
        chart.clone(),
        &p.h1.0,
        &p.h2.0,
        p.ws.assumptions(),
    )
    .map_err(|e| e.to_string())?;
    let d = quadratic_coefficients(pert.h2(), &pert.space()).map_err(|e| e.to_string())?;
    let rep = second_order_check(&pert, &zt).map_err(|e| e.to_string())?;
    ensure(
        rep.verdict == Verdict::Fail,
        "second-order check did not fail",
    )?;
    let w = rep.witness.as_ref().ok_or("no witness")?;
    ensure(
        w.condition == "separated",
        format!("witness condition {}", w.condition),
    )?;
    let r2 = &chart.riemann_vars()[1];
    ensure(w.expr.depends_on(r2), "witness does not depend on R2")?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..25 {
        let a: f64 = rng.gen_range(0.5..3.0);
        let b: f64 = a - rng.gen_range(0.2..2.0);
        let (ax, bx): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        // independent substitution: r = (R1 - R2)^2/4, v_x = R1_x + R2_x into r^3 v_x^2/6
        let r = (a - b).powi(2) / 4.0;
        let oracle_coeff = r.powi(3) / 6.0;
        let oracle_density = oracle_coeff * (ax + bx).powi(2);
        let pt = [("R1", 0, a), ("R2", 0, b), ("R1", 1, ax), ("R2", 1, bx)];
        ensure(
            close(oracle_coeff, (a - b).powi(6) / 384.0),
            "substitution oracle disagrees with (R1-R2)^6/384",
        )?;
        for row in &d {
            for x in row {
                ensure(
                    close(eval(x, &pt), oracle_coeff),
                    format!("d = {x} disagrees with oracle"),
                )?;
            }
        }
        ensure(
            close(eval(pert.h2(), &pt), oracle_density),
            "chart density disagrees with oracle",
        )?;
        // ∂_{R2} of the witness at this point, by central difference
        let h = 1e-4;
        let at = |bb: f64| eval(&w.expr, &[("R1", 0, a), ("R2", 0, bb)]);
        let slope = (at(b + h) - at(b - h)) / (2.0 * h);
        let exact = -6.0 * (a - b).powi(5) / 576.0;
        ensure(
            (slope - exact).abs() <= 1e-5 * (1.0 + exact.abs()),
            "witness slope in R2 disagrees",
        )?;
    }
    Ok(format!(
        "NOT integrable, witness [{}] depends on R2; h2 coefficient (R1-R2)^6/384 by substitution",
        w.condition
    ))
}

/// Census of order-zero densities and the extension verdict vector.
fn criterion_3() -> Outcome {
    let (p, chart) = waterwave();
    let zt = ZeroTester::new(&p.ws);
    let census = solve_claws0(&p.sys, &p.bases["census"], &zt).map_err(|e| e.to_string())?;
    ensure(
        census.len() == 5,
        format!("census has {} densities", census.len()),
    )?;
    for f in &census {
        ensure(
            check_conserved0(&p.sys, None, f, &zt).conserved,
            format!("`{f}` not conserved"),
        )?;
    }
    let pert = Perturbation::from_state(p.sys.clone(), chart, &p.h1.0, &p.h2.0, p.ws.assumptions())
        .map_err(|e| e.to_string())?;
    let mut words = Vec::new();
    for f in WATERWAVE_DENSITIES {
        let f0 = p.ws.parse(f).unwrap();
        ensure(
            check_conserved0(&p.sys, None, &f0, &zt).conserved,
            format!("`{f}` not conserved"),
        )?;
        let ext =
            second_order_extension_solve(&pert, &f0, &zt, false).map_err(|e| e.to_string())?;
        words.push(if ext.verdict == Verdict::Pass {
            "pass"
        } else {
            "fail"
        });
    }
    ensure(
        words == ["pass", "pass", "pass", "pass", "fail"],
        format!("extension vector {words:?}"),
    )?;
    Ok(format!(
        "5 densities; extensions {words:?}, failing for 1/2 v^2 + r log r"
    ))
}

/// Randomized canonical-form perturbations on both bases.
fn criterion_4() -> Outcome {
    let mut counts = [0usize; 2];
    for seed in 0..20u64 {
        let r = run_synthetic_integrable_case(seed).map_err(|e| format!("seed {seed}: {e}"))?;
        let bad: Vec<String> = r
            .failed()
            .iter()
            .map(|e| format!("{} ({})", e.name, e.observed))
            .collect();
        ensure(bad.is_empty(), format!("seed {seed}: {}", bad.join(", ")))?;
        let ext = r
            .expectations
            .iter()
            .find(|e| e.name == "extensions")
            .ok_or("no extension count")?;
        ensure(
            ext.observed.parse::<usize>().unwrap_or(0) >= 3,
            format!("seed {seed}: {} extensions", ext.observed),
        )?;
        counts[(r.manifest.variables.len() == 3) as usize] += 1;
    }
    ensure(
        counts[0] >= 1 && counts[1] >= 1,
        "both bases must be exercised",
    )?;
    Ok(format!(
        "20 instances ({} water-wave chart, {} diagonal n=3): check, K1, ≥ 3 extensions each",
        counts[0], counts[1]
    ))
}

fn jet_space(n: usize) -> (Workspace, JetSpace) {
    let names = ["u", "w"];
    let (ws, vars) = Workspace::with_vars(&names[..n], VarKind::State);
    (ws, JetSpace::new(vars, hamperturb::jet::Chart::State))
}

/// Differential polynomial with jets up to `order` and degree ≤ 3.
fn random_density(rng: &mut ChaCha8Rng, space: &JetSpace, order: u32) -> Expr {
    let mut out = Expr::zero();
    for _ in 0..rng.gen_range(1..=3) {
        let mut term = Expr::int(rng.gen_range(-4i64..=4));
        for _ in 0..rng.gen_range(1..=3) {
            let i = rng.gen_range(0..space.n());
            term = &term * &space.jet(i, rng.gen_range(0..=order));
        }
        out = &out + &term;
    }
    out
}

/// Euler operator on total derivatives; antisymmetry and Jacobi.
fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..200 {
        let n = 1 + k % 2;
        let (ws, space) = jet_space(n);
        let f = random_density(&mut rng, &space, 3);
        let dx = space.total_x_derivative(&f);
        for b in 0..n {
            ensure(space.euler(&dx, b).is_zero(), format!("E_{b}(∂x({f})) ≠ 0"))?;
        }
        let _ = ws;
    }
    for k in 0..50 {
        let n = 1 + k % 2;
        let (ws, space) = jet_space(n);
        let zt = ZeroTester::new(&ws);
        let metric = if n == 1 {
            Metric::identity(1)
        } else {
            Metric::from_integers(&[&[0, 1], &[1, 0]]).unwrap()
        };
        let op = HamiltonianOperator::constant(metric);
        let lf = |e: Expr| LocalFunctional::from_expr(e, &space).unwrap();
        let [f, g, h] = [0, 1, 2].map(|_| lf(random_density(&mut rng, &space, 2)));
        let br =
            |a: &LocalFunctional, b: &LocalFunctional| poisson_bracket(a, b, &op, &space).unwrap();
        let anti = br(&f, &g).add(&br(&g, &f));
        ensure(
            space.is_total_derivative(anti.density(), &zt),
            format!("antisymmetry fails, triple {k}"),
        )?;
        let jac = br(&br(&f, &g), &h)
            .add(&br(&br(&g, &h), &f))
            .add(&br(&br(&h, &f), &g));
        ensure(
            space.is_total_derivative(jac.density(), &zt),
            format!("Jacobi fails, triple {k}"),
        )?;
    }
    Ok("E(∂x f) = 0 on 200 densities; antisymmetry and Jacobi on 50 triples".into())
}

/// First-order perturbations `{H0, ∫g}` are recognized and trivialized.
fn criterion_6() -> Outcome {
    let (p, chart) = waterwave();
    let zt = ZeroTester::new(&p.ws);
    let space = p.sys.space().clone();
    let fields = p.sys.fields().to_vec();
    let basis = monomial_basis(&fields, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut done = 0;
    let mut tries = 0;
    while done < 10 {
        tries += 1;
        ensure(tries < 100, "too few nontrivial instances")?;
        let mut g = Expr::zero();
        for _ in 0..rng.gen_range(1..=3) {
            g = &g
                + &basis[rng.gen_range(0..basis.len())]
                    .scale(&hamperturb::kernel::integer(rng.gen_range(1..=5)));
        }
        let h0 = LocalFunctional::from_expr(p.sys.h0().clone(), &space).unwrap();
        let gf = LocalFunctional::from_expr(g.clone(), &space).unwrap();
        let h1 = poisson_bracket(&h0, &gf, &p.sys.operator(), &space).unwrap();
        if space.is_total_derivative(h1.density(), &zt) {
            continue;
        }
        let pert = Perturbation::from_state(
            p.sys.clone(),
            chart.clone(),
            h1.density(),
            &Expr::zero(),
            p.ws.assumptions(),
        )
        .map_err(|e| e.to_string())?;
        let first = first_order_check(&pert, &zt).map_err(|e| e.to_string())?;
        ensure(
            first.verdict.is_ok(),
            format!("first-order check {:?} for g = {g}", first.verdict),
        )?;
        let t = first_order_trivialize(&pert, &basis, &zt).map_err(|e| format!("g = {g}: {e}"))?;
        ensure(
            t.checks.iter().all(|c| c.passed),
            format!("k0 verification fails for g = {g}"),
        )?;
        let diff = &t.k0_state - &g;
        ensure(
            check_conserved0(&p.sys, None, &diff, &zt).conserved,
            format!(
                "k0 = {} differs from g = {g} by a non-conserved density",
                t.k0_state
            ),
        )?;
        done += 1;
    }
    Ok(format!(
        "{done} instances: first-order check ok, k0 recovered up to conserved densities"
    ))
}

/// Byte-stable case report.
fn criterion_7() -> Outcome {
    let runs: Vec<String> = (0..3)
        .map(|_| run_waterwave_case().unwrap().to_json())
        .collect();
    ensure(
        runs[0] == runs[1] && runs[1] == runs[2],
        "water-wave case reports differ",
    )?;
    ensure(
        !runs[0].contains("timing_ms"),
        "timing leaked into the case report",
    )?;
    Ok(format!("3 runs, {} bytes each, identical", runs[0].len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("1 water-wave base and chart", criterion_1),
        ("2 water-wave non-integrability", criterion_2),
        ("3 census and extensions", criterion_3),
        ("4 canonical round trips", criterion_4),
        ("5 jet and bracket properties", criterion_5),
        ("6 first-order trivialization", criterion_6),
        ("7 deterministic case report", criterion_7),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match &out {
            Ok(msg) => println!("PASS criterion {name}: {msg} ({secs:.2}s)"),
            Err(msg) => {
                println!("FAIL criterion {name}: {msg} ({secs:.2}s)");
                failed.push(name);
            }
        }
        if secs > 60.0 {
            println!("FAIL criterion {name}: took {secs:.1}s, limit 60s");
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
