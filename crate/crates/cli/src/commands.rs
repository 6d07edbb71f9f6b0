use std::sync::Arc;

use anyhow::anyhow;
use serde::Serialize;
use serde_json::{json, Value};

use nblab_core::auxiliary::{
    check_boundedness_criteria, check_holder_sufficient, counterexample_g, heat_growth, window_integral,
    BoundednessCriteria, HeatGrowth, NeumannHeatProblem,
};
use nblab_core::blowup::{
    default_q_candidates, estimate_blowup_time, interior_localization, BlowupError, BlowupEstimate, LocalizationConfig,
};
use nblab_core::criteria::{evaluate_criteria, CriteriaError};
use nblab_core::domain::{Domain1D, Reduction};
use nblab_core::export::{csv_table, LinePlot, Series};
use nblab_core::ode::{solve_comparison_ode, ComparisonODE, OdeKind};
use nblab_core::pde::{self, Diagnostic, Grid1D, PdeError, SolverConfig, Trajectory, Verdict};
use nblab_core::supersolutions::{
    construct_l1_pg1, construct_p1_bounded, construct_p1_exp, construct_small_exponent, construct_superlinear,
    perturbation_check, tighten, verify_supersolution, CandidateRecord, ExprCandidate, Family, L1Pg1Options,
    P1ExpOptions, PerturbationOutcome, SuperError, SupersolutionCandidate, VerificationReport, PERTURBATION,
};
use nblab_core::{CoefficientExpr, CriterionReport, ProblemSpec, ReducedCoefficients, VarSet};

use crate::output::Outputs;
use crate::{Classify, Context, Failure, Status, VerifyArgs};

/// Row cap for per-step CSV series; the final steps are always kept.
const MAX_ROWS: usize = 4000;
const TAIL_ROWS: usize = 400;
/// Default `ε` for `P1_EXP` when the config gives none.
const P1_EXP_EPSILON: f64 = 0.5;
const ORDERING_TOL: f64 = 1e-6;

pub fn pde_failure(e: PdeError) -> Failure {
    match e {
        PdeError::InvalidConfig(_) | PdeError::Incompatible { .. } | PdeError::Spec(_) => Failure::Config(e.into()),
        _ => Failure::Numeric(e.into()),
    }
}

fn super_failure(e: SuperError) -> Failure {
    match e {
        SuperError::Invalid(_) | SuperError::Hypothesis(_) | SuperError::Parse(_) | SuperError::Spec(_) => {
            Failure::Config(e.into())
        }
        SuperError::Pde(e) => pde_failure(e),
        _ => Failure::Numeric(e.into()),
    }
}

fn criteria_failure(e: CriteriaError) -> Failure {
    match e {
        CriteriaError::Pde(e) => pde_failure(e),
        CriteriaError::Super(e) => super_failure(e),
        _ => Failure::Numeric(e.into()),
    }
}

fn blowup_failure(e: BlowupError) -> Failure {
    match e {
        BlowupError::Hypothesis(_) | BlowupError::Invalid(_) | BlowupError::Spec(_) => Failure::Config(e.into()),
        BlowupError::Pde(e) => pde_failure(e),
        _ => Failure::Numeric(e.into()),
    }
}

pub fn grid_for(spec: &ProblemSpec, nodes: usize) -> Result<Grid1D, Failure> {
    Grid1D::new(spec.domain, nodes).map_err(pde_failure)
}

/// At most `max` evenly strided items plus the final `tail` ones.
pub fn thin<T: Copy>(items: &[T], max: usize, tail: usize) -> Vec<T> {
    if items.len() <= max + tail {
        return items.to_vec();
    }
    let head = &items[..items.len() - tail];
    let stride = head.len().div_ceil(max);
    head.iter().step_by(stride).chain(&items[items.len() - tail..]).copied().collect()
}

pub fn diagnostics_csv(diags: &[Diagnostic]) -> String {
    csv_table(
        &["t", "mass", "sup_norm", "j", "dt"],
        thin(diags, MAX_ROWS, TAIL_ROWS).iter().map(|d| [d.t, d.mass, d.sup_norm, d.j, d.dt]),
    )
}

fn finish(ctx: &Context, outputs: Outputs, subcommand: &str, args: Value) -> Result<(), Failure> {
    let parameters = json!({ "config": ctx.cfg.resolved().config()?, "args": args });
    outputs.finish(subcommand, parameters).numeric()?;
    Ok(())
}

fn outputs(ctx: &Context) -> Result<Outputs, Failure> {
    Outputs::new(&ctx.out, ctx.reproducible).numeric()
}

#[derive(Serialize)]
struct SolveSummary {
    verdict: Verdict,
    t_final: f64,
    mass_final: f64,
    sup_norm_max: f64,
    accepted_steps: usize,
    rejected_steps: usize,
    clamp_events: usize,
    estimate: Option<BlowupEstimate>,
    estimate_error: Option<String>,
}

pub fn solve_summary(spec: &ProblemSpec, traj: &Trajectory) -> (Option<BlowupEstimate>, Option<String>) {
    if traj.verdict.is_global() {
        return (None, None);
    }
    let qs = default_q_candidates(spec.exponents.p, spec.exponents.l);
    match estimate_blowup_time(traj, &qs) {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn solve(ctx: &Context) -> Result<Status, Failure> {
    let spec = ctx.cfg.spec().config()?;
    let grid = grid_for(&spec, ctx.cfg.nodes)?;
    let traj = pde::solve(&spec, &grid, &ctx.cfg.solver).map_err(pde_failure)?;
    let (estimate, estimate_error) = solve_summary(&spec, &traj);
    let last = traj.diagnostics.last().expect("the initial state is recorded");
    let summary = SolveSummary {
        verdict: traj.verdict.clone(),
        t_final: last.t,
        mass_final: last.mass,
        sup_norm_max: traj.sup_norm_max(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        clamp_events: traj.clamp_events,
        estimate,
        estimate_error,
    };

    let mut out = outputs(ctx)?;
    out.text("trajectory.csv", &diagnostics_csv(&traj.diagnostics)).numeric()?;
    let rows = traj
        .snapshots
        .iter()
        .flat_map(|s| grid.nodes().iter().zip(&s.u).map(move |(&x, &u)| [s.t, x, u]));
    out.text("snapshots.csv", &csv_table(&["t", "x", "u"], rows)).numeric()?;
    out.json("verdict.json", &summary).numeric()?;
    let pts = thin(&traj.diagnostics, MAX_ROWS, TAIL_ROWS);
    let plot = LinePlot::new("Solution diagnostics", "t", "value")
        .log_y()
        .with(Series::new("sup norm", pts.iter().map(|d| (d.t, d.sup_norm)).collect()))
        .with(Series::new("mass", pts.iter().map(|d| (d.t, d.mass)).collect()));
    out.svg("diagnostics.svg", &plot).numeric()?;
    finish(ctx, out, "solve", json!({}))?;

    match &summary.estimate {
        Some(e) => println!("verdict: {} (T_est = {}, q = {})", summary.verdict.label(), e.t_est, e.q_fit),
        None => println!("verdict: {} at t = {}", summary.verdict.label(), summary.t_final),
    }
    Ok(Status::Ok)
}

pub fn criteria(ctx: &Context) -> Result<Status, Failure> {
    let spec = ctx.cfg.spec().config()?;
    let report = evaluate_criteria(&spec, &ctx.cfg.criteria).map_err(criteria_failure)?;
    let mut out = outputs(ctx)?;
    out.json("criteria.json", &report).numeric()?;
    finish(ctx, out, "criteria", json!({}))?;
    println!("verdict: {}", report.verdict.label());
    if let Some(exceeds) = report.w0_exceeds_threshold {
        println!("w0 = {} {} threshold", report.w0, if exceeds { "exceeds" } else { "does not exceed" });
    }
    Ok(Status::Ok)
}

fn parse_override(text: &str) -> anyhow::Result<(String, f64)> {
    let (name, value) = text.split_once('=').ok_or_else(|| anyhow!("expected NAME=VALUE, got `{text}`"))?;
    let value: f64 = value.trim().parse().map_err(|_| anyhow!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), value))
}

fn construct(ctx: &Context, family: Family, spec: &ProblemSpec, grid: &Grid1D) -> Result<SupersolutionCandidate, Failure> {
    let cfg = &ctx.cfg.supersolution;
    let v = &ctx.cfg.verify;
    let v0 = v.v0.as_deref().map(|t| CoefficientExpr::parse(t, VarSet::X)).transpose().config()?;
    let cand = match family {
        Family::SmallExp => construct_small_exponent(spec, grid, cfg),
        Family::Superlinear => construct_superlinear(spec, grid, cfg, v0),
        Family::P1Exp => construct_p1_exp(
            spec,
            grid,
            cfg,
            P1ExpOptions {
                epsilon: v.epsilon.unwrap_or(P1_EXP_EPSILON),
                shift: v.shift,
                k_bound: v.k_bound,
            },
        ),
        Family::P1Bounded => construct_p1_bounded(spec, grid, cfg, v0),
        Family::L1Pg1 => construct_l1_pg1(spec, grid, cfg, L1Pg1Options { k2: v.k2 }),
    };
    cand.map_err(super_failure)
}

#[derive(Serialize)]
struct FamilyVerification {
    family: Family,
    overrides: Vec<(String, f64)>,
    candidate: CandidateRecord,
    tightened: Option<CandidateRecord>,
    perturbations: Option<Vec<PerturbationOutcome>>,
    passed: bool,
}

#[derive(Serialize)]
struct ExprVerification {
    expr: String,
    times: usize,
    report: VerificationReport,
    criterion: CriterionReport,
    passed: bool,
}

pub fn verify_super(ctx: &Context, args: &VerifyArgs) -> Result<Status, Failure> {
    let spec = ctx.cfg.spec().config()?;
    let grid = grid_for(&spec, ctx.cfg.nodes)?;
    let mut out = outputs(ctx)?;
    let passed = if let Some(text) = &args.expr {
        if !args.params.is_empty() || args.tighten || args.perturb {
            return Err(Failure::Config(anyhow!("--param, --tighten and --perturb apply to --family only")));
        }
        let cand = ExprCandidate::parse(text).map_err(super_failure)?;
        let times = ctx.cfg.supersolution.times();
        let report =
            verify_supersolution(&cand, &spec, &grid, &times, ctx.cfg.supersolution.tol).map_err(super_failure)?;
        let doc = ExprVerification {
            expr: text.clone(),
            times: times.len(),
            report,
            criterion: report.to_report(),
            passed: report.passed,
        };
        out.json("verification.json", &doc).numeric()?;
        report.passed
    } else {
        let tag = args.family.as_deref().unwrap_or_default();
        let family = Family::from_tag(tag).ok_or_else(|| Failure::Config(anyhow!("unknown family `{tag}`")))?;
        let overrides = args.params.iter().map(|p| parse_override(p)).collect::<Result<Vec<_>, _>>().config()?;
        let mut cand = construct(ctx, family, &spec, &grid)?;
        for (name, value) in &overrides {
            cand = cand.with_param(name, *value).map_err(super_failure)?;
        }
        if !overrides.is_empty() {
            cand.report = cand.verify().map_err(super_failure)?;
        }
        let tightened = if args.tighten { Some(tighten(&cand).map_err(super_failure)?) } else { None };
        let last = tightened.as_ref().unwrap_or(&cand);
        let perturbations = args.perturb.then(|| perturbation_check(last, PERTURBATION));
        let doc = FamilyVerification {
            family,
            overrides,
            candidate: cand.record(),
            tightened: tightened.as_ref().map(|c| c.record()),
            perturbations,
            passed: last.report.passed,
        };
        out.json("verification.json", &doc).numeric()?;
        if let Some(ps) = &doc.perturbations {
            for p in ps {
                println!(
                    "perturb {} {:?}: constrained={} detected={}",
                    p.param, p.direction, p.constrained, p.detected
                );
            }
        }
        doc.passed
    };
    finish(ctx, out, "verify-super", serde_json::to_value(args).numeric()?)?;
    println!("supersolution check: {}", if passed { "pass" } else { "fail" });
    Ok(if passed { Status::Ok } else { Status::CheckFailed })
}

#[derive(Serialize)]
struct BoundednessDoc {
    g: String,
    criteria: BoundednessCriteria,
    report: CriterionReport,
    simulation: Option<HeatGrowth>,
}

pub fn boundedness(ctx: &Context) -> Result<Status, Failure> {
    let b = &ctx.cfg.boundedness;
    let g = CoefficientExpr::parse(&b.g, VarSet::T).config()?;
    let criteria = check_boundedness_criteria(&g, b.t0, b.alpha, b.horizon).config()?;
    let mut out = outputs(ctx)?;
    let simulation = if b.simulate {
        let domain = Domain1D::new(b.length).config()?;
        let v0 = CoefficientExpr::parse(&b.v0, VarSet::X).config()?;
        let prob = NeumannHeatProblem::new(domain, Arc::new(g.clone()), v0).config()?;
        let grid = Grid1D::new(domain, b.nodes).map_err(pde_failure)?;
        let solver = SolverConfig {
            waive_compatibility: true,
            ..ctx.cfg.solver.clone()
        };
        let (growth, traj) = heat_growth(&prob, &grid, &solver, b.growth_window).numeric()?;
        out.text("heat.csv", &diagnostics_csv(&traj.diagnostics)).numeric()?;
        let pts = thin(&traj.diagnostics, MAX_ROWS, TAIL_ROWS);
        let plot = LinePlot::new(format!("Heat equation with flux g = {}", b.g), "t", "sup norm")
            .with(Series::new("sup norm", pts.iter().map(|d| (d.t, d.sup_norm)).collect()));
        out.svg("heat.svg", &plot).numeric()?;
        Some(growth)
    } else {
        None
    };
    let doc = BoundednessDoc {
        g: g.source(),
        report: criteria.to_report(),
        criteria,
        simulation,
    };
    out.json("boundedness.json", &doc).numeric()?;
    finish(ctx, out, "boundedness-check", json!({}))?;
    print!("verdict: {}", doc.report.verdict);
    if let Some(s) = &doc.simulation {
        print!(" (sup-norm growth over [{}, {}]: {:.4})", s.window[0], s.window[1], s.growth);
    }
    println!();
    Ok(Status::Ok)
}

pub fn localize(ctx: &Context) -> Result<Status, Failure> {
    let spec = ctx.cfg.spec().config()?;
    let l = &ctx.cfg.localization;
    let mut cfg = LocalizationConfig::for_length(spec.domain.length());
    if let Some(v) = l.eps_dist {
        cfg.eps_dist = v;
    }
    if let Some(v) = l.nodes {
        cfg.nodes = v;
    }
    if let Some(v) = l.u_max {
        cfg.solver.u_max = v;
    }
    if let Some(v) = l.dt_min {
        cfg.solver.dt_min = v;
    }
    if let Some(v) = l.t_end {
        cfg.solver.t_end = v;
    }
    let report = interior_localization(&spec, &cfg).map_err(blowup_failure)?;
    let mut out = outputs(ctx)?;
    out.text("localization.csv", &report.to_csv()).numeric()?;
    out.svg("localization.svg", &report.plot()).numeric()?;
    let mut doc = serde_json::to_value(&report).numeric()?;
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("samples");
        obj.insert("criterion".into(), serde_json::to_value(report.to_report()).numeric()?);
        obj.insert("config".into(), serde_json::to_value(&cfg).numeric()?);
    }
    out.json("localization.json", &doc).numeric()?;
    finish(ctx, out, "localize", json!({}))?;
    println!(
        "localization: {} (ratio {:.3e}, T_est = {})",
        if report.passed { "pass" } else { "fail" },
        report.ratio_at_stop,
        report.estimate.t_est
    );
    Ok(Status::Ok)
}

fn default_kind(p: f64, l: f64) -> Option<OdeKind> {
    if p >= 1.0 && l >= 1.0 && p.max(l) > 1.0 {
        Some(OdeKind::Sum)
    } else if p > 1.0 {
        Some(OdeKind::C0P)
    } else if l > 1.0 {
        Some(OdeKind::K0L)
    } else {
        None
    }
}

/// Cubic Hermite interpolation in sorted `(t, w)` pairs with slopes from
/// `rhs`; `None` past the end.
fn interpolate(points: &[(f64, f64)], t: f64, rhs: &dyn Fn(f64, f64) -> f64) -> Option<f64> {
    let i = points.partition_point(|p| p.0 < t);
    if i == 0 {
        return points.first().filter(|p| p.0 == t).map(|p| p.1);
    }
    let (t1, w1) = *points.get(i)?;
    let (t0, w0) = points[i - 1];
    let h = t1 - t0;
    if h == 0.0 {
        return Some(w1);
    }
    let s = (t - t0) / h;
    let (d0, d1) = (rhs(t0, w0) * h, rhs(t1, w1) * h);
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    Some(h00 * w0 + h10 * d0 + h01 * w1 + h11 * d1)
}

#[derive(Serialize)]
struct OdeDoc {
    kind: OdeKind,
    w0: f64,
    ode_blowup_time: Option<f64>,
    ode_t_stop: f64,
    pde_verdict: Option<Verdict>,
    pde_estimate: Option<BlowupEstimate>,
    /// `min (w_pde - w_ode) / max(1, w_ode)` over common times.
    min_relative_margin: Option<f64>,
    ordered: Option<bool>,
}

pub fn ode_compare(ctx: &Context) -> Result<Status, Failure> {
    let spec = ctx.cfg.spec().config()?;
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    let kind = ctx
        .cfg
        .ode
        .kind
        .or_else(|| default_kind(p, l))
        .ok_or_else(|| Failure::Config(anyhow!("no comparison ODE for p={p}, l={l}")))?;
    let samples = ctx.cfg.criteria.samples;
    let w0 = spec.initial_mass(samples).config()?;
    let reduced = ReducedCoefficients::new(&spec, samples);
    let ode = ComparisonODE::new(
        kind,
        p,
        l,
        Arc::new(reduced.function(Reduction::C0)),
        Arc::new(reduced.function(Reduction::K0)),
        w0,
    )
    .config()?;
    let sol = solve_comparison_ode(&ode, ctx.cfg.ode.t_end).numeric()?;
    let mut out = outputs(ctx)?;
    out.text("ode.csv", &csv_table(&["t", "w"], sol.points.iter().map(|&(t, w)| [t, w]))).numeric()?;
    let mut plot = LinePlot::new("Mass and comparison ODE", "t", "mass")
        .log_y()
        .with(Series::new("ODE", thin(&sol.points, MAX_ROWS, TAIL_ROWS)));
    let mut doc = OdeDoc {
        kind,
        w0,
        ode_blowup_time: sol.blowup_time,
        ode_t_stop: sol.t_stop,
        pde_verdict: None,
        pde_estimate: None,
        min_relative_margin: None,
        ordered: None,
    };
    if ctx.cfg.ode.simulate {
        let grid = grid_for(&spec, ctx.cfg.nodes)?;
        let solver = ctx.cfg.solver.clone().with_t_end(ctx.cfg.ode.t_end);
        let traj = pde::solve(&spec, &grid, &solver).map_err(pde_failure)?;
        let rhs = |t: f64, w: f64| ode.rhs(t, w).unwrap_or(f64::NAN);
        let rows: Vec<[f64; 4]> = thin(&traj.diagnostics, MAX_ROWS, TAIL_ROWS)
            .iter()
            .filter_map(|d| {
                let w = interpolate(&sol.points, d.t, &rhs)?;
                Some([d.t, d.mass, w, (d.mass - w) / w.max(1.0)])
            })
            .collect();
        let margin = traj
            .diagnostics
            .iter()
            .filter_map(|d| interpolate(&sol.points, d.t, &rhs).map(|w| (d.mass - w) / w.max(1.0)))
            .fold(f64::INFINITY, f64::min);
        out.text("comparison.csv", &csv_table(&["t", "pde_mass", "ode_w", "relative_margin"], &rows))
            .numeric()?;
        plot = plot.with(Series::new("PDE mass", rows.iter().map(|r| (r[0], r[1])).collect()));
        doc.pde_estimate = solve_summary(&spec, &traj).0;
        doc.pde_verdict = Some(traj.verdict);
        doc.min_relative_margin = margin.is_finite().then_some(margin);
        doc.ordered = doc.min_relative_margin.map(|m| m >= -ORDERING_TOL);
    }
    out.svg("ode.svg", &plot).numeric()?;
    out.json("ode.json", &doc).numeric()?;
    finish(ctx, out, "ode-compare", json!({}))?;
    match doc.ode_blowup_time {
        Some(t) => println!("comparison ODE blows up at t = {t}"),
        None => println!("comparison ODE stays bounded up to t = {}", doc.ode_t_stop),
    }
    if let Some(ordered) = doc.ordered {
        println!("mass dominates the ODE solution: {ordered}");
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct CounterexampleDoc {
    alpha: f64,
    criteria: BoundednessCriteria,
    report: CriterionReport,
    holder: CriterionReport,
    window_at_n: Vec<(f64, f64)>,
    increasing: bool,
}

pub fn counterexample(ctx: &Context) -> Result<Status, Failure> {
    let c = &ctx.cfg.counterexample;
    let g = counterexample_g(c.alpha).config()?;
    let criteria = check_boundedness_criteria(&g, c.t0, c.window_alpha, c.horizon).config()?;
    let holder = check_holder_sufficient(&g, c.holder_q, c.t0, c.window_alpha, c.horizon).config()?;
    let window_at_n = c
        .n
        .iter()
        .map(|&n| window_integral(&g, n, c.t0).map(|w| (n, w)))
        .collect::<Result<Vec<_>, _>>()
        .numeric()?;
    let increasing = window_at_n.windows(2).all(|w| w[1].1 > w[0].1);
    let mut series = Vec::new();
    let mut n = 2.0;
    while n <= c.horizon {
        series.push([n, window_integral(&g, n, c.t0).numeric()?]);
        n += 1.0;
    }
    let mut out = outputs(ctx)?;
    out.text("window.csv", &csv_table(&["n", "window_integral"], &series)).numeric()?;
    let plot = LinePlot::new(format!("Window integral at t = n, alpha = {}", c.alpha), "n", "window integral")
        .with(Series::new("window", series.iter().map(|r| (r[0], r[1])).collect()));
    out.svg("window.svg", &plot).numeric()?;
    let doc = CounterexampleDoc {
        alpha: c.alpha,
        report: criteria.to_report(),
        criteria,
        holder,
        window_at_n,
        increasing,
    };
    out.json("counterexample.json", &doc).numeric()?;
    finish(ctx, out, "counterexample", json!({}))?;
    println!(
        "verdict: {} (integral of g {}, window integrals increasing: {})",
        doc.report.verdict,
        if doc.criteria.integral_finite { "finite" } else { "infinite" },
        increasing
    );
    Ok(Status::Ok)
}
