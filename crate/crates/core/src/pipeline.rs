//! Stage orchestration behind the command line: hydro → chart → first →
//! second, then generators or extensions.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::hydro::matrix::ExprMatrix;
use crate::hydro::{
    is_hydro_integrable, solve_chart_n2, solve_claws0, tsarev_check, verify_chart, RiemannChart,
};
use crate::kernel::{Expr, ZeroStats, ZeroTester};
use crate::manifest::{monomial_basis, DensityChart, Manifest, ManifestError, Problem};
use crate::perturbation::{
    build_h2_canonical, extend_claw, first_order_check, quasi_trivialize, reduce_first_order,
    second_order_check, second_order_extension_solve, ExtendError, Generator, Perturbation,
    PerturbationError, SecondOrderReport, TrivializeError, Trivializer, Witness,
};
use crate::report::{ProvenanceInfo, Report, StageReport, WitnessOut, REPORT_SCHEMA_VERSION};
use crate::verdict::{all_passed, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Hydro,
    First,
    Second,
    All,
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hydro" => Ok(Stage::Hydro),
            "first" => Ok(Stage::First),
            "second" => Ok(Stage::Second),
            "all" => Ok(Stage::All),
            _ => Err(format!("unknown stage `{s}`")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub timing: bool,
    pub require_generic: bool,
}

/// Densities to extend.
#[derive(Clone, Debug, PartialEq)]
pub enum F0Source {
    Exprs(Vec<String>),
    /// Census over a named manifest basis.
    Basis(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{0}")]
    Input(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

/// Name of the basis used for `k0`, with a degree-3 monomial default.
pub const K0_BASIS: &str = "k0";

fn strings(v: &[Expr]) -> Vec<String> {
    v.iter().map(|e| e.to_string()).collect()
}

fn matrix(m: &ExprMatrix) -> Vec<Vec<String>> {
    m.iter().map(|r| strings(r)).collect()
}

fn witness_out(w: &Witness) -> WitnessOut {
    WitnessOut {
        condition: w.condition.clone(),
        expr: w.expr.to_string(),
        detail: w.detail.clone(),
    }
}

fn perturbation_error(e: PerturbationError) -> PipelineError {
    match e {
        PerturbationError::Internal { check, residual } => {
            PipelineError::Internal(format!("{check}: {residual}"))
        }
        other => PipelineError::Input(other.to_string()),
    }
}

struct Run {
    command: String,
    name: String,
    stages: Vec<StageReport>,
    timing: Option<BTreeMap<String, u64>>,
    stats: ZeroStats,
    sample_box: [f64; 2],
    /// Stages reported but left out of the overall verdict.
    informational: Vec<&'static str>,
}

impl Run {
    fn new(command: &str, p: &Problem, opts: &Options) -> Self {
        Run {
            command: command.into(),
            name: p.name.clone(),
            stages: Vec::new(),
            timing: opts.timing.then(BTreeMap::new),
            stats: ZeroStats {
                seed: p.ws.sampling().seed,
                points: p.ws.sampling().points,
                ..ZeroStats::default()
            },
            sample_box: [p.ws.sampling().lo, p.ws.sampling().hi],
            informational: Vec::new(),
        }
    }

    fn absorb(&mut self, zt: &ZeroTester) {
        let s = zt.stats();
        self.stats.exact += s.exact;
        self.stats.probabilistic += s.probabilistic;
    }

    fn push(&mut self, stage: StageReport, started: Instant) -> Verdict {
        if let Some(t) = &mut self.timing {
            t.insert(stage.stage.clone(), started.elapsed().as_millis() as u64);
        }
        let v = stage.verdict;
        self.stages.push(stage);
        v
    }

    fn skip(&mut self, stage: &str, reason: &str) {
        let mut s = StageReport::new(stage, Verdict::Skipped);
        s.warnings.push(reason.into());
        self.stages.push(s);
    }

    fn finish(self) -> Report {
        let decisive: Vec<&StageReport> = self
            .stages
            .iter()
            .filter(|s| !self.informational.contains(&s.stage.as_str()))
            .collect();
        let verdict = decisive
            .iter()
            .map(|s| s.verdict)
            .fold(Verdict::Vacuous, Verdict::and);
        // a skipped stage never counts as success of the run
        let verdict = if decisive.iter().any(|s| s.verdict == Verdict::Skipped) && verdict.is_ok() {
            Verdict::Fail
        } else {
            verdict
        };
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            command: self.command,
            name: self.name,
            verdict,
            stages: self.stages,
            provenance: ProvenanceInfo::new(&self.stats, self.sample_box),
            timing_ms: self.timing,
        }
    }
}

/// Hydro and chart stages; returns the chart when both pass.
fn base_stages(p: &mut Problem, run: &mut Run) -> Result<Option<RiemannChart>, PipelineError> {
    let t = Instant::now();
    let hydro = {
        let zt = ZeroTester::new(&p.ws);
        let mut checks = p.sys.eta_symmetry(&zt);
        let h = is_hydro_integrable(&p.sys, &zt);
        checks.extend(h.checks);
        let mut st = StageReport::new("hydro", Verdict::from_bool(all_passed(&checks)))
            .value("n", p.sys.n())
            .value("velocity", matrix(&p.sys.velocity().to_vec()));
        if let Some(((a, b, c), res)) = h.witness {
            st.witness = Some(WitnessOut {
                condition: "haantjes".into(),
                expr: res,
                detail: format!("Haantjes component [{a}][{b}][{c}] does not vanish"),
            });
        }
        st.checks = checks;
        run.absorb(&zt);
        st
    };
    if !run.push(hydro, t).is_ok() {
        run.skip("chart", "hydrodynamic system is not integrable");
        return Ok(None);
    }

    let t = Instant::now();
    let supplied = p.chart.is_some();
    let chart = match &p.chart {
        Some(c) => RiemannChart::new(
            p.sys.fields().to_vec(),
            p.riemann.clone(),
            c.invariants.clone(),
            c.inverse.clone(),
            c.lambda.clone(),
            p.ws.assumptions(),
        ),
        None if p.sys.n() == 2 => solve_chart_n2(&p.sys, &mut p.ws),
        None => {
            return Err(PipelineError::Input(format!(
                "a chart is required for n = {}",
                p.sys.n()
            )))
        }
    }
    .map_err(|e| PipelineError::Input(format!("chart: {e}")))?;
    let zt = ZeroTester::new(&p.ws);
    let vr = verify_chart(&p.sys, &chart, &zt);
    let ts = tsarev_check(&chart, &zt);
    let mut checks = vr.checks;
    checks.extend(ts.checks);
    let lii: Vec<Expr> = (0..chart.n()).map(|i| chart.lambda_deriv(i, i)).collect();
    let mut st = StageReport::new("chart", Verdict::from_bool(all_passed(&checks)))
        .value("supplied", supplied)
        .value(
            "riemann",
            chart
                .riemann_vars()
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>(),
        )
        .value("invariants", strings(chart.forward()))
        .value("inverse", strings(chart.inverse()))
        .value("lambda", vr.labeling)
        .value("lambda_ii", strings(&lii));
    st.checks = checks;
    run.absorb(&zt);
    if !run.push(st, t).is_ok() {
        return Ok(None);
    }
    Ok(Some(chart))
}

fn perturbation(p: &Problem, chart: &RiemannChart) -> Result<Perturbation, PipelineError> {
    let asm = p.ws.assumptions();
    let to_r = |(e, c): &(Expr, DensityChart)| match c {
        DensityChart::State => chart.density_to_riemann(e, asm),
        DensityChart::Riemann => e.clone(),
    };
    let h2 = match &p.canonical {
        Some((c, phi)) => build_h2_canonical(chart, c, phi).map_err(perturbation_error)?,
        None => to_r(&p.h2),
    };
    Perturbation::new(p.sys.clone(), chart.clone(), to_r(&p.h1), h2, asm)
        .map_err(perturbation_error)
}

fn k0_basis(p: &Problem) -> Vec<Expr> {
    p.bases
        .get(K0_BASIS)
        .cloned()
        .unwrap_or_else(|| monomial_basis(p.sys.fields(), 3))
}

struct Analysis {
    pert: Perturbation,
    trivializer: Option<Trivializer>,
    k0_insufficient: bool,
    second: Option<SecondOrderReport>,
}

/// Runs the stages up to `stage`.
fn analyse(
    p: &mut Problem,
    stage: Stage,
    run: &mut Run,
) -> Result<Option<Analysis>, PipelineError> {
    let Some(chart) = base_stages(p, run)? else {
        if stage != Stage::Hydro {
            run.skip("first", "base stages failed");
            if stage != Stage::First {
                run.skip("second", "base stages failed");
            }
        }
        return Ok(None);
    };
    let pert = perturbation(p, &chart)?;
    if stage == Stage::Hydro {
        return Ok(Some(Analysis {
            pert,
            trivializer: None,
            k0_insufficient: false,
            second: None,
        }));
    }
    let zt = ZeroTester::new(&p.ws);
    let t = Instant::now();
    let first = first_order_check(&pert, &zt).map_err(perturbation_error)?;
    let mut st = StageReport::new("first", first.verdict)
        .value("p", strings(&first.p))
        .value("omega", matrix(&first.omega));
    if let Some(bad) = first.checks.iter().find(|c| !c.passed) {
        st.witness = Some(WitnessOut {
            condition: "first-order".into(),
            expr: bad.residual.clone(),
            detail: format!("{} does not vanish", bad.name),
        });
    }
    st.checks = first.checks.clone();
    let first_ok = run.push(st, t).is_ok();
    let mut analysis = Analysis {
        pert,
        trivializer: None,
        k0_insufficient: false,
        second: None,
    };
    if stage == Stage::First {
        run.absorb(&zt);
        return Ok(Some(analysis));
    }
    if !first_ok {
        run.absorb(&zt);
        run.skip("second", "first-order condition fails");
        return Ok(Some(analysis));
    }

    let t = Instant::now();
    let mut warnings = Vec::new();
    let mut reduced_h2 = None;
    if !analysis.pert.h1().is_zero() {
        match reduce_first_order(&analysis.pert, &k0_basis(p), &zt) {
            Ok((reduced, triv)) => {
                reduced_h2 = Some(reduced.h2().to_string());
                analysis.pert = reduced;
                analysis.trivializer = Some(triv);
            }
            Err(TrivializeError::BasisInsufficient { size }) => {
                analysis.k0_insufficient = true;
                warnings.push(format!(
                    "H1 could not be removed: no k0 in the {size}-element basis; H2 analysed without reduction"
                ));
            }
            Err(TrivializeError::NotIntegrable) => unreachable!("first stage passed"),
            Err(TrivializeError::Perturbation(e)) => return Err(perturbation_error(e)),
        }
    }
    let mut st = match second_order_check(&analysis.pert, &zt) {
        Ok(rep) => {
            let mut st = StageReport::new("second", rep.verdict)
                .value("d", matrix(&rep.d))
                .value("lambda_ii", strings(&rep.lambda_ii))
                .value("c", strings(&rep.c))
                .value("s_canonical", matrix(&rep.s_canonical));
            if let Some(s) = &rep.s {
                st.set("s", matrix(s));
            }
            if let Some(phi) = &rep.phi {
                st.set("phi", strings(phi));
            }
            st.witness = rep.witness.as_ref().map(witness_out);
            st.checks = rep.checks.clone();
            analysis.second = Some(rep);
            st
        }
        Err(PerturbationError::Quadrature { i, j, s, reason }) => {
            let mut st = StageReport::new("second", Verdict::BasisInsufficient);
            st.witness = Some(WitnessOut {
                condition: "quadrature".into(),
                expr: s,
                detail: format!(
                    "φ potential for s_{i}{j} is outside the supported class: {reason}"
                ),
            });
            st
        }
        Err(e) => return Err(perturbation_error(e)),
    };
    if let Some(h2) = reduced_h2 {
        st.set("reduced_h2", h2);
    }
    st.warnings = warnings;
    run.push(st, t);
    run.absorb(&zt);
    Ok(Some(analysis))
}

pub fn check(manifest: &Manifest, stage: Stage, opts: &Options) -> Result<Report, PipelineError> {
    let mut p = manifest.build(opts.seed)?;
    let mut run = Run::new("check", &p, opts);
    analyse(&mut p, stage, &mut run)?;
    Ok(run.finish())
}

pub fn trivialize(manifest: &Manifest, opts: &Options) -> Result<Report, PipelineError> {
    let mut p = manifest.build(opts.seed)?;
    let mut run = Run::new("trivialize", &p, opts);
    let Some(a) = analyse(&mut p, Stage::All, &mut run)? else {
        run.skip("trivialize", "base stages failed");
        return Ok(run.finish());
    };
    let t = Instant::now();
    let zt = ZeroTester::new(&p.ws);
    let mut st = StageReport::new("trivialize", Verdict::Pass);
    let mut checks = Vec::new();
    if let Some(tr) = &a.trivializer {
        st.set("k0", tr.k0.to_string());
        st.set("k0_state", tr.k0_state.to_string());
        checks.extend(tr.checks.clone());
    } else {
        st.set("k0", "0");
    }
    if a.k0_insufficient {
        st.verdict = Verdict::BasisInsufficient;
    }
    match &a.second {
        Some(rep) if rep.verdict == Verdict::Pass => {
            let g: Generator = quasi_trivialize(&a.pert, rep, &zt).map_err(perturbation_error)?;
            st.set("k1", g.density.to_string());
            let asm = p.ws.assumptions();
            st.set(
                "k1_state",
                a.pert.chart().density_to_state(&g.density, asm).to_string(),
            );
            checks.extend(g.checks);
        }
        Some(rep) => {
            st.verdict = st.verdict.and(rep.verdict);
            st.witness = rep.witness.as_ref().map(witness_out);
            st.warnings
                .push("no quasi-trivialization exists at second order".into());
        }
        None => {
            st.verdict = Verdict::Skipped;
            st.warnings.push("second-order stage did not run".into());
        }
    }
    st.checks = checks;
    run.push(st, t);
    run.absorb(&zt);
    Ok(run.finish())
}

#[derive(Serialize)]
struct ExtensionOut {
    f0: String,
    verdict: Verdict,
    generic: bool,
    mu: Vec<String>,
    f2: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator_route: Option<Verdict>,
}

fn extend_error(e: ExtendError) -> PipelineError {
    match e {
        ExtendError::Perturbation(p) => perturbation_error(p),
        other => PipelineError::Input(other.to_string()),
    }
}

pub fn extend(manifest: &Manifest, f0: &F0Source, opts: &Options) -> Result<Report, PipelineError> {
    let mut p = manifest.build(opts.seed)?;
    let mut run = Run::new("extend", &p, opts);
    // the direct route does not need the perturbation to be integrable
    run.informational = vec!["first", "second"];
    let densities: Vec<Expr> = match f0 {
        F0Source::Exprs(list) => list
            .iter()
            .map(|t| {
                p.ws.parse(t)
                    .map_err(|e| PipelineError::Input(format!("--f0 `{t}`: {e}")))
            })
            .collect::<Result<_, _>>()?,
        F0Source::Basis(name) => {
            let basis = p.bases.get(name).ok_or_else(|| {
                PipelineError::Input(format!("no basis named `{name}` in the manifest"))
            })?;
            let zt = ZeroTester::new(&p.ws);
            let out = solve_claws0(&p.sys, basis, &zt)
                .map_err(|e| PipelineError::Input(e.to_string()))?;
            run.absorb(&zt);
            out
        }
    };
    let Some(a) = analyse(&mut p, Stage::All, &mut run)? else {
        run.skip("extend", "base stages failed");
        return Ok(run.finish());
    };
    let t = Instant::now();
    let zt = ZeroTester::new(&p.ws);
    let generator = match &a.second {
        Some(rep) if rep.verdict == Verdict::Pass => Some((
            rep,
            quasi_trivialize(&a.pert, rep, &zt).map_err(perturbation_error)?,
        )),
        _ => None,
    };
    let mut st = StageReport::new("extend", Verdict::Vacuous);
    let mut outs = Vec::new();
    for f in &densities {
        let ext = second_order_extension_solve(&a.pert, f, &zt, opts.require_generic)
            .map_err(extend_error)?;
        let generator_route = match &generator {
            Some((rep, g)) => Some(
                extend_claw(&a.pert, rep, g, f, &zt, opts.require_generic)
                    .map_err(extend_error)?
                    .verdict,
            ),
            None => None,
        };
        if !ext.generic {
            st.warnings.push(format!(
                "`{f}` is non-generic (coincident μ); use --require-generic to reject"
            ));
        }
        st.verdict = st.verdict.and(ext.verdict);
        if let Some(Verdict::Fail) = generator_route {
            st.verdict = Verdict::Fail;
        }
        st.checks.extend(ext.checks.iter().map(|c| {
            let mut c = c.clone();
            c.name = format!("{f}: {}", c.name);
            c
        }));
        outs.push(ExtensionOut {
            f0: f.to_string(),
            verdict: ext.verdict,
            generic: ext.generic,
            mu: strings(&ext.mu),
            f2: ext.f2.to_string(),
            d: ext.d.as_ref().map(matrix),
            witness: ext
                .witness
                .as_ref()
                .map(|c| format!("{}: {}", c.name, c.residual)),
            generator_route,
        });
    }
    if let Some(first_bad) = outs.iter().find(|o| o.verdict == Verdict::Fail) {
        st.witness = Some(WitnessOut {
            condition: "extension".into(),
            expr: first_bad.f0.clone(),
            detail: first_bad.witness.clone().unwrap_or_default(),
        });
    }
    st.set("extensions", &outs);
    run.push(st, t);
    run.absorb(&zt);
    Ok(run.finish())
}
