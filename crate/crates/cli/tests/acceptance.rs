//! The eight acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary so that the report is printed even when the
//! run succeeds. Exits nonzero when the set of failing criteria differs
//! from `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nblab_core::auxiliary::{
    check_boundedness_criteria, counterexample_g, heat_growth, solve_elliptic_nonlocal, window_integral, Boundedness,
    NeumannHeatProblem,
};
use nblab_core::blowup::{default_q_candidates, estimate_blowup_time, interior_localization, LocalizationConfig, FIT_R2, RATIO_LIMIT};
use nblab_core::criteria::{evaluate_criteria, CriteriaConfig};
use nblab_core::domain::Domain1D;
use nblab_core::export::csv_table;
use nblab_core::pde::{solve, Grid1D, SolverConfig, Trajectory, Verdict};
use nblab_core::supersolutions::{
    construct_l1_pg1, construct_p1_bounded, construct_p1_exp, construct_small_exponent, construct_superlinear,
    perturbation_check, tighten, L1Pg1Options, P1ExpOptions, SuperConfig, SupersolutionCandidate, PERTURBATION,
};
use nblab_core::{CoefficientExpr, ProblemSpec, VarSet};

/// Criterion 5 asks for at least 50% sup-norm growth over [25, 50] under the
/// flux 1/(1+t). The mass grows by 2 ln(51/26) ≈ 1.35 over that window and
/// the solution is nearly flat, so the ratio stays near 1.2 for any datum.
const KNOWN_FAILURES: &[usize] = &[5];

struct Outcome {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Outcome {
            passed,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.details.push(d.into());
        self
    }
}

fn spec(len: f64, p: f64, l: f64, c: &str, k: &str, u0: &str) -> Result<ProblemSpec> {
    Ok(ProblemSpec::from_strings(len, p, l, c, k, u0)?)
}

fn constant(v: f64) -> CoefficientExpr {
    CoefficientExpr::constant(v, VarSet::X)
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

/// u' = u², u(0) = 2 blows up at 1/2.
fn flat_blowup() -> Result<Outcome> {
    let start = Instant::now();
    let s = spec(1.0, 2.0, 2.0, "1", "0", "2")?;
    let grid = Grid1D::new(s.domain, 201)?;
    let traj = solve(&s, &grid, &SolverConfig::default())?;
    let est = estimate_blowup_time(&traj, &default_q_candidates(2.0, 2.0))?;
    let secs = start.elapsed().as_secs_f64();
    let exact = 1.0 / 2.0;
    let rel = (est.t_est - exact).abs() / exact;
    let passed = traj.verdict.is_blowup() && rel < 0.02 && secs < 10.0;
    Ok(Outcome::new(
        passed,
        format!("T_est = {:.6} vs 0.5 (rel. error {rel:.1e}, q = {}), {secs:.2} s", est.t_est, est.q_fit),
    ))
}

/// Flat data keep `w' = e^{-t} w²`, whose blow-up threshold is
/// `1 / ∫_0^∞ e^{-t} dt = 1`.
fn threshold_sharpness() -> Result<Outcome> {
    let start = Instant::now();
    let base = spec(1.0, 2.0, 2.0, "exp(-t)", "0", "1")?;
    let report = evaluate_criteria(&base.with_initial(constant(1.5)), &CriteriaConfig::default())?;
    let threshold = report.threshold.unwrap_or(f64::NAN);
    let threshold_ok = (threshold - 1.0).abs() < 1e-6;
    let grid = Grid1D::new(base.domain, 51)?;
    let cfg = SolverConfig::default().with_t_end(10.0);
    let run = |w0: f64| -> Result<Verdict> { Ok(solve(&base.with_initial(constant(w0)), &grid, &cfg)?.verdict) };

    let w0s: Vec<f64> = (0..16).map(|i| 0.1 + 2.9 * i as f64 / 15.0).collect();
    let mut largest_global = f64::NEG_INFINITY;
    let mut smallest_blowup = f64::INFINITY;
    let mut violations = Vec::new();
    for &w0 in &w0s {
        let v = run(w0)?;
        if v.is_global() {
            largest_global = largest_global.max(w0);
            if w0 > threshold {
                violations.push(w0);
            }
        } else {
            smallest_blowup = smallest_blowup.min(w0);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let at_15 = run(1.5)?;
    let at_3 = run(3.0)?;
    let passed = threshold_ok && violations.is_empty() && !at_15.is_global() && !at_3.is_global() && secs < 120.0;
    Ok(Outcome::new(
        passed,
        format!(
            "w* = {threshold:.9}; largest global w0 = {largest_global:.4}, smallest blow-up w0 = {smallest_blowup:.4}; {secs:.1} s for 16 runs"
        ),
    )
    .detail(format!("w0 = 1.5: {}, w0 = 3: {}", at_15.label(), at_3.label()))
    .detail(format!("global runs above w*: {violations:?}")))
}

const C_CATALOG: [&str; 6] = ["1", "1 + x", "2*exp(-t)", "1 + 0.5*sin(pi*x)", "1/(1+t)", "0"];
const K_CATALOG: [&str; 5] = ["1", "0.5*(1 + y)", "exp(-t)", "1 + 0.5*cos(pi*y)*exp(-t)", "0.3 + 0.2*x"];
const U0_CATALOG: [&str; 5] = ["1", "1 + cos(pi*x)", "2 - x", "0.5 + x^2", "0.1*x*(2 - x)"];

fn sublinear_catalog() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let t_end = 20.0;
    let mut outcome = Outcome::new(true, String::new());
    let mut blowups = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..12 {
        let round = |v: f64| (v * 100.0).round() / 100.0;
        let len = round(rng.gen_range(1.0..2.0));
        let p = round(rng.gen_range(0.1..=1.0));
        let l = round(rng.gen_range(0.1..=1.0));
        let c = C_CATALOG.choose(&mut rng).unwrap();
        let k = K_CATALOG.choose(&mut rng).unwrap();
        let u0 = U0_CATALOG.choose(&mut rng).unwrap();
        let s = spec(len, p, l, c, k, u0)?;
        let grid = Grid1D::new(s.domain, 51)?;
        let cfg = SolverConfig {
            t_end,
            output_times: (1..20).map(f64::from).collect(),
            waive_compatibility: true,
            // sublinear solutions may grow like t^{1/(1-l)}
            u_max: 1e100,
            ..SolverConfig::default()
        };
        let traj = solve(&s, &grid, &cfg)?;
        let sup_cfg = SuperConfig {
            t_end,
            time_nodes: 41,
            ..SuperConfig::default()
        };
        let cand = construct_small_exponent(&s, &grid, &sup_cfg)?;
        let mut excess = f64::NEG_INFINITY;
        for snap in traj.snapshots.iter().filter(|s| s.t.fract() == 0.0) {
            let bound = cand.values_at(snap.t)?;
            for (u, b) in snap.u.iter().zip(&bound) {
                excess = excess.max(u - b);
            }
        }
        let global = traj.verdict.is_global();
        if !global {
            blowups += 1;
        }
        let ok = global && excess <= 1e-4 && cand.report.passed;
        outcome.passed &= ok;
        worst_excess = worst_excess.max(excess);
        outcome = outcome.detail(format!(
            "#{i:02} L={len} p={p} l={l} c={c} k={k} u0={u0}: {}, max(u - ubar) = {excess:.3e}, supersolution {} [{}]",
            traj.verdict.label(),
            if cand.report.passed { "verified" } else { "unverified" },
            mark(ok)
        ));
    }
    outcome.summary = format!(
        "12 specs, {blowups} blow-up verdicts, worst max(u - ubar) = {worst_excess:.3e}, {:.1} s",
        start.elapsed().as_secs_f64()
    );
    Ok(outcome)
}

fn verifier_soundness() -> Result<Outcome> {
    let start = Instant::now();
    let grid = Grid1D::new(Domain1D::unit(), 201)?;
    let cfg = SuperConfig::default().with_t_end(2.0);
    let s = |p, l, c, k, u0| spec(1.0, p, l, c, k, u0);
    let o = |epsilon, k_bound| P1ExpOptions {
        epsilon,
        shift: None,
        k_bound,
    };
    let d = L1Pg1Options::default();
    type Build<'a> = Box<dyn Fn() -> Result<SupersolutionCandidate> + 'a>;
    let g = &grid;
    let c = &cfg;
    let cases: Vec<(&str, Build)> = vec![
        ("SMALL_EXP linear", Box::new(|| Ok(construct_small_exponent(&s(1.0, 1.0, "1", "1", "1")?, g, c)?))),
        ("SMALL_EXP sqrt", Box::new(|| Ok(construct_small_exponent(&s(0.5, 0.5, "1 + x", "0.5", "1 + cos(pi*x)")?, g, c)?))),
        ("SMALL_EXP mixed", Box::new(|| Ok(construct_small_exponent(&s(0.8, 0.6, "exp(-t)", "1 + y", "1")?, g, c)?))),
        ("SUPERLINEAR flux", Box::new(|| Ok(construct_superlinear(&s(2.0, 2.0, "0", "exp(-t)", "0")?, g, c, None)?))),
        ("SUPERLINEAR reaction", Box::new(|| Ok(construct_superlinear(&s(2.0, 2.0, "exp(-t)", "0", "0")?, g, c, None)?))),
        ("SUPERLINEAR both", Box::new(|| Ok(construct_superlinear(&s(3.0, 2.0, "exp(-t)", "exp(-2*t)", "0")?, g, c, None)?))),
        ("P1_EXP flux", Box::new(|| Ok(construct_p1_exp(&s(1.0, 2.0, "0", "0.2*exp(-0.5*t)", "0")?, g, c, o(0.5, Some(0.2)))?))),
        ("P1_EXP reaction", Box::new(|| Ok(construct_p1_exp(&s(1.0, 2.0, "exp(-t)", "0.1*exp(-t)", "0")?, g, c, o(0.5, None))?))),
        ("P1_EXP cubic", Box::new(|| Ok(construct_p1_exp(&s(1.0, 3.0, "0", "0.05*exp(-2*t)", "0")?, g, c, o(1.0, None))?))),
        ("P1_BOUNDED decay", Box::new(|| Ok(construct_p1_bounded(&s(1.0, 2.0, "1/(1+t)^2", "exp(-2*t)", "0")?, g, c, None)?))),
        ("P1_BOUNDED flux", Box::new(|| Ok(construct_p1_bounded(&s(1.0, 2.0, "0", "exp(-t)", "0")?, g, c, None)?))),
        ("P1_BOUNDED space", Box::new(|| Ok(construct_p1_bounded(&s(1.0, 3.0, "exp(-t)*(1+x)", "exp(-3*t)*(1+y)", "0")?, g, c, None)?))),
        ("L1_PG1 constant", Box::new(|| Ok(construct_l1_pg1(&s(2.0, 1.0, "exp(-2*t)", "0.5", "0")?, g, c, d)?))),
        ("L1_PG1 space", Box::new(|| Ok(construct_l1_pg1(&s(3.0, 1.0, "exp(-3*t)*(2-x)", "0.5", "0")?, g, c, d)?))),
        ("L1_PG1 skew", Box::new(|| Ok(construct_l1_pg1(&s(2.0, 1.0, "exp(-2*t)", "0.3 + 0.2*x", "0")?, g, c, d)?))),
    ];
    let mut outcome = Outcome::new(true, String::new());
    let (mut perturbed, mut detected) = (0, 0);
    for (name, build) in &cases {
        let line = match build().and_then(|cand| Ok((tighten(&cand)?, cand))) {
            Ok((tight, cand)) => {
                let outcomes = perturbation_check(&tight, PERTURBATION);
                let constrained: Vec<_> = outcomes.iter().filter(|o| o.constrained).collect();
                let caught = constrained.iter().filter(|o| o.detected).count();
                perturbed += constrained.len();
                detected += caught;
                let ok = cand.report.passed && tight.report.passed && !constrained.is_empty() && caught == constrained.len();
                outcome.passed &= ok;
                let names: Vec<String> = constrained.iter().map(|o| o.param.clone()).collect();
                format!("{name}: verified, {caught}/{} perturbations of {names:?} detected [{}]", constrained.len(), mark(ok))
            }
            Err(e) => {
                outcome.passed = false;
                format!("{name}: construction failed: {e} [FAILED]")
            }
        };
        outcome = outcome.detail(line);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome.passed &= secs < 60.0;
    outcome.summary = format!(
        "{} constructions at tol {:e}, {detected}/{perturbed} adversarial perturbations detected, {secs:.1} s",
        cases.len(),
        cfg.tol
    );
    Ok(outcome)
}

fn boundedness_lemma() -> Result<Outcome> {
    let start = Instant::now();
    let (t0, alpha, horizon) = (0.5, 1.0, 128.0);
    let domain = Domain1D::unit();
    let grid = Grid1D::new(domain, 51)?;
    let solver = SolverConfig::default().waived();
    let mut outcome = Outcome::new(true, String::new());
    let catalog = [
        ("exp(-t)", Boundedness::Bounded),
        ("(1+t)^(-2)", Boundedness::Bounded),
        ("exp(-t)*(1 + sin(t))", Boundedness::Bounded),
        ("1/(1+t)", Boundedness::Unbounded),
        ("1", Boundedness::Unbounded),
    ];
    for (text, expected) in catalog {
        let g = CoefficientExpr::parse(text, VarSet::T)?;
        let crit = check_boundedness_criteria(&g, t0, alpha, horizon)?;
        let prob = NeumannHeatProblem::new(domain, Arc::new(g), constant(1.0))?;
        let (growth, _) = heat_growth(&prob, &grid, &solver, [25.0, 50.0])?;
        let growth_ok = match expected {
            Boundedness::Bounded => growth.growth < 0.05,
            Boundedness::Unbounded => growth.growth >= 0.5,
        };
        let ok = crit.verdict == expected && growth_ok;
        outcome.passed &= ok;
        outcome = outcome.detail(format!(
            "g = {text}: {:?} (expected {expected:?}), sup-norm growth over [25, 50] = {:.4} (need {}) [{}]",
            crit.verdict,
            growth.growth,
            if expected == Boundedness::Bounded { "< 0.05" } else { ">= 0.5" },
            mark(ok)
        ));
    }
    let g = counterexample_g(0.75)?;
    let crit = check_boundedness_criteria(&g, t0, alpha, horizon)?;
    let windows: Vec<f64> = [4.0, 8.0, 16.0, 32.0].iter().map(|&n| window_integral(&g, n, t0)).collect::<Result<_, _>>()?;
    let increasing = windows.windows(2).all(|w| w[1] > w[0]);
    let ok = crit.verdict == Boundedness::Unbounded && !crit.window_bounded && crit.integral_finite && increasing;
    outcome.passed &= ok;
    outcome = outcome.detail(format!(
        "counterexample alpha = 0.75: {:?}, integral of g = {:.6} (finite: {}), window bounded: {}, window at n = 4, 8, 16, 32: {:.5?} [{}]",
        crit.verdict, crit.integral_of_g.value, crit.integral_finite, crit.window_bounded, windows, mark(ok)
    ));
    let secs = start.elapsed().as_secs_f64();
    outcome.passed &= secs < 120.0;
    let failing = outcome.details.iter().filter(|d| d.ends_with("[FAILED]")).count();
    outcome.summary = format!("5-flux catalog plus counterexample, {failing} sub-check(s) failing, {secs:.1} s");
    Ok(outcome)
}

/// `v = A cosh(√a x) + B sinh(√a x)` with `B = -g0/√a`,
/// `A = (gL + g0 cosh(√a L)) / (√a sinh(√a L))`.
fn cosh_solution(g0: f64, gl: f64, len: f64, x: f64) -> f64 {
    let r = (g0 + gl).sqrt();
    let b = -g0 / r;
    let a = (gl + g0 * (r * len).cosh()) / (r * (r * len).sinh());
    a * (r * x).cosh() + b * (r * x).sinh()
}

fn elliptic_lemma() -> Result<Outcome> {
    let (g0, gl) = (1.0, 2.0);
    let domain = Domain1D::unit();
    let mut errors = Vec::new();
    let mut normalization: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for n in [51, 101, 201] {
        let grid = Grid1D::new(domain, n)?;
        let sol = solve_elliptic_nonlocal(g0, gl, &grid)?;
        let err = sol
            .nodes
            .iter()
            .zip(&sol.v)
            .map(|(&x, &v)| (v - cosh_solution(g0, gl, 1.0, x)).abs())
            .fold(0.0, f64::max);
        errors.push(err);
        normalization = normalization.max(sol.normalization_residual().abs());
        for alpha in [0.5, 1.0, 3.0] {
            for r in sol.boundary_residuals(alpha) {
                boundary = boundary.max(r.abs() / alpha);
            }
        }
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let order_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    let passed = order_ok && normalization <= 1e-8 && boundary <= 1e-8;
    Ok(Outcome::new(
        passed,
        format!(
            "orders {:.3?}, max |a∫v - (g0+gL)| = {normalization:.1e}, max scaled boundary residual = {boundary:.1e}",
            orders
        ),
    )
    .detail(format!("max errors at N = 51, 101, 201: {}", sci(&errors))))
}

fn localization() -> Result<Outcome> {
    let start = Instant::now();
    let s = spec(1.0, 1.0, 2.0, "0", "5", "1")?;
    let report = interior_localization(&s, &LocalizationConfig::for_length(1.0))?;
    let secs = start.elapsed().as_secs_f64();
    let passed = report.verdict.is_blowup() && report.ratio_at_stop <= RATIO_LIMIT && report.fit.r2 >= FIT_R2 && report.fit_ok && secs < 60.0;
    Ok(Outcome::new(
        passed,
        format!(
            "{} at t = {:.6}, interior/boundary = {:.2e}, fit slope {:.3} (bound {:.0}) R² = {:.3}, {secs:.1} s",
            report.verdict.label(),
            report.estimate.t_last,
            report.ratio_at_stop,
            report.fit.slope,
            report.fit.bound_exponent,
            report.fit.r2
        ),
    )
    .detail(format!(
        "T_est = {:.6}, boundary max at stop {:.3e}, interior max {:.4}, centered R² {:.3}, spread {:.1e}",
        report.estimate.t_est, report.boundary_max_at_stop, report.interior_max_at_stop, report.fit.r2_centered, report.fit.spread
    )))
}

fn snapshot_csv(traj: &Trajectory) -> String {
    csv_table(&["t", "i", "u"], traj.snapshots.iter().flat_map(|s| s.u.iter().enumerate().map(move |(i, &u)| [s.t, i as f64, u])))
}

fn run_cli(args: &[&str], config: &Path, out: &Path) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_nblab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--reproducible")
        .env_remove("NBLAB_OUT")
        .output()?;
    if !status.status.success() {
        bail!("nblab {args:?} failed: {}", String::from_utf8_lossy(&status.stderr));
    }
    Ok(())
}

fn identical_dirs(a: &Path, b: &Path) -> Result<usize> {
    let mut names: Vec<_> = fs::read_dir(a)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    names.sort();
    for name in &names {
        if fs::read(a.join(name))? != fs::read(b.join(name))? {
            bail!("{} differs between runs", name.to_string_lossy());
        }
    }
    Ok(names.len())
}

fn numerical_core() -> Result<Outcome> {
    let tight = SolverConfig {
        rtol: 1e-10,
        atol: 1e-12,
        ..SolverConfig::default()
    };

    let heat = spec(1.0, 2.0, 2.0, "0", "0", "1 + cos(pi*x)")?;
    let grid = Grid1D::new(heat.domain, 101)?;
    let traj = solve(&heat, &grid, &SolverConfig::default())?;
    let m0 = traj.diagnostics[0].mass;
    let drift = traj.diagnostics.iter().map(|d| (d.mass - m0).abs() / m0).fold(0.0, f64::max);
    let mass_ok = traj.verdict.is_global() && drift <= 1e-8;

    let t_end = 0.1;
    let mut errs = Vec::new();
    for n in [41, 81, 161] {
        let grid = Grid1D::new(heat.domain, n)?;
        let traj = solve(&heat, &grid, &tight.clone().with_t_end(t_end))?;
        let decay = (-PI * PI * t_end).exp();
        let err = grid
            .nodes()
            .iter()
            .zip(&traj.last_state().u)
            .map(|(&x, &u)| (u - (1.0 + decay * (PI * x).cos())).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let orders: Vec<f64> = errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let order_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);

    let lower = spec(1.0, 2.0, 2.0, "1", "0.5", "0.2 + 0.1*cos(pi*x)")?;
    let upper = lower.with_initial(CoefficientExpr::parse("0.25 + 0.1*cos(pi*x)", VarSet::X)?);
    let grid = Grid1D::new(lower.domain, 101)?;
    let cfg = SolverConfig {
        output_times: (1..10).map(|i| i as f64 / 10.0).collect(),
        waive_compatibility: true,
        ..SolverConfig::default()
    };
    let a = solve(&lower, &grid, &cfg)?;
    let b = solve(&upper, &grid, &cfg)?;
    let mut gap = f64::INFINITY;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        if sa.t != sb.t {
            bail!("snapshot times differ: {} vs {}", sa.t, sb.t);
        }
        for (ua, ub) in sa.u.iter().zip(&sb.u) {
            gap = gap.min(ub - ua);
        }
    }
    let ordering_ok = a.verdict.is_global() && b.verdict.is_global() && a.snapshots.len() == 11 && gap >= -1e-6;

    let again = solve(&lower, &grid, &cfg)?;
    let in_process = again == a && snapshot_csv(&again) == snapshot_csv(&a);
    let dir = std::env::temp_dir().join(format!("nblab-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir)?;
    let config = dir.join("config.json");
    fs::write(
        &config,
        r#"{
            "problem": {"L": 1, "p": 2, "l": 2, "c": "exp(-t)", "k": "0", "u0": "1.5"},
            "nodes": 41,
            "solver": {"t_end": 5, "output_times": [0.5, 1]},
            "sweep": {"x": {"axis": "u0_scale", "values": [0.5, 1]}, "y": {"axis": "p", "values": [2, 3]}, "nodes": 21, "t_end": 3}
        }"#,
    )?;
    let mut files = 0;
    for cmd in ["solve", "criteria", "sweep", "ode-compare"] {
        let (r1, r2) = (dir.join(format!("{cmd}-1")), dir.join(format!("{cmd}-2")));
        run_cli(&[cmd], &config, &r1)?;
        run_cli(&[cmd], &config, &r2)?;
        files += identical_dirs(&r1, &r2)?;
    }
    let _ = fs::remove_dir_all(&dir);
    let deterministic = in_process;

    let passed = mass_ok && order_ok && ordering_ok && deterministic;
    Ok(Outcome::new(
        passed,
        format!(
            "mass drift {drift:.1e}, cosine orders {orders:.3?}, nested min gap {gap:.2e}, {files} CLI artifacts byte-identical"
        ),
    )
    .detail(format!("mass conservation [{}]", mark(mass_ok)))
    .detail(format!("cosine errors at N = 41, 81, 161: {} [{}]", sci(&errs), mark(order_ok)))
    .detail(format!("comparison ordering [{}]", mark(ordering_ok)))
    .detail(format!("determinism [{}]", mark(deterministic))))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Result<Outcome>); 8] = [
        (1, "flat-profile blow-up time", flat_blowup),
        (2, "threshold sharpness", threshold_sharpness),
        (3, "sublinear regime", sublinear_catalog),
        (4, "supersolution verifier soundness", verifier_soundness),
        (5, "boundedness lemma", boundedness_lemma),
        (6, "elliptic nonlocal lemma", elliptic_lemma),
        (7, "boundary localization", localization),
        (8, "numerical core", numerical_core),
    ];
    let mut failing = Vec::new();
    for (n, title, run) in criteria {
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e:#}")));
        println!("[{}] {n} {title}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.summary);
        for d in &outcome.details {
            println!("       {d}");
        }
        if !outcome.passed {
            failing.push(n);
        }
    }
    println!(
        "acceptance: {}/8 criteria pass; failing {:?}, expected failing {:?}",
        8 - failing.len(),
        failing,
        KNOWN_FAILURES
    );
    if failing != KNOWN_FAILURES {
        std::process::exit(1);
    }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}
