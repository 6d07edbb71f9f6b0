use anyhow::anyhow;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use nblab_core::criteria::{evaluate_criteria, OverallVerdict};
use nblab_core::pde::{self, Grid1D, SolverConfig};
use nblab_core::ProblemSpec;

use crate::config::{AxisKind, SweepSection};
use crate::output::Outputs;
use crate::{Classify, Context, Failure, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Blowup,
    Global,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Yes,
    No,
    /// The criteria make no prediction for this cell.
    Na,
}

#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub x: f64,
    pub y: Option<f64>,
    pub p: f64,
    pub l: f64,
    pub w0: f64,
    pub criteria: String,
    pub threshold: Option<f64>,
    pub prediction: Prediction,
    pub simulated: String,
    pub t_stop: f64,
    pub agreement: Agreement,
    pub error: Option<String>,
}

fn apply(spec: &ProblemSpec, axis: AxisKind, v: f64) -> anyhow::Result<ProblemSpec> {
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    let next = match axis {
        AxisKind::P => spec.with_exponents(v, l)?,
        AxisKind::L => spec.with_exponents(p, v)?,
        AxisKind::U0Scale => {
            if !(v >= 0.0) {
                return Err(anyhow!("u0 scale must be nonnegative, got {v}"));
            }
            spec.with_initial(spec.u0.scaled(v))
        }
        AxisKind::Decay => ProblemSpec {
            c: spec.c.damped(v),
            k: spec.k.damped(v),
            ..spec.clone()
        },
    };
    Ok(next)
}

fn predict(verdict: &OverallVerdict, w0: f64) -> Prediction {
    match verdict {
        OverallVerdict::AllGlobal => Prediction::Global,
        v if v.predicts_blowup(w0) => Prediction::Blowup,
        _ => Prediction::None,
    }
}

struct Job {
    row: usize,
    col: usize,
    x: f64,
    y: Option<f64>,
    spec: ProblemSpec,
}

fn run_cell(ctx: &Context, sweep: &SweepSection, solver: &SolverConfig, job: &Job) -> Cell {
    let Job { row, col, x, y, ref spec } = *job;
    let mut cell = Cell {
        row,
        col,
        x,
        y,
        p: spec.exponents.p,
        l: spec.exponents.l,
        w0: f64::NAN,
        criteria: "Error".into(),
        threshold: None,
        prediction: Prediction::None,
        simulated: "Error".into(),
        t_stop: f64::NAN,
        agreement: Agreement::Na,
        error: None,
    };
    let mut errors = Vec::new();
    match evaluate_criteria(spec, &ctx.cfg.criteria) {
        Ok(r) => {
            cell.w0 = r.w0;
            cell.criteria = r.verdict.label();
            cell.threshold = r.threshold;
            cell.prediction = predict(&r.verdict, r.w0);
        }
        Err(e) => errors.push(format!("criteria: {e}")),
    }
    let simulated = Grid1D::new(spec.domain, sweep.nodes).and_then(|g| pde::solve(spec, &g, solver));
    match simulated {
        Ok(traj) => {
            cell.simulated = traj.verdict.label().into();
            cell.t_stop = traj.last_state().t;
            let blew_up = !traj.verdict.is_global();
            cell.agreement = match cell.prediction {
                Prediction::None => Agreement::Na,
                Prediction::Blowup if blew_up => Agreement::Yes,
                Prediction::Global if !blew_up => Agreement::Yes,
                _ => Agreement::No,
            };
        }
        Err(e) => errors.push(format!("simulation: {e}")),
    }
    if !errors.is_empty() {
        cell.error = Some(errors.join("; "));
    }
    cell
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn regime_csv(cells: &[Cell]) -> String {
    let mut out = String::from("row,col,x,y,p,l,w0,criteria,threshold,prediction,simulated,t_stop,agreement\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.row,
            c.col,
            c.x,
            opt(c.y),
            c.p,
            c.l,
            c.w0,
            c.criteria,
            opt(c.threshold),
            label(&c.prediction),
            c.simulated,
            c.t_stop,
            label(&c.agreement),
        ));
    }
    out
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub fn sweep(ctx: &Context) -> Result<Status, Failure> {
    let base = ctx.cfg.spec().config()?;
    let sweep = ctx
        .cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Config(anyhow!("config has no sweep section")))?;
    let xs = sweep.x.resolve().config()?;
    let ys = match &sweep.y {
        Some(y) => {
            if y.axis == sweep.x.axis {
                return Err(Failure::Config(anyhow!("the two sweep axes must differ")));
            }
            y.resolve().config()?.into_iter().map(Some).collect()
        }
        None => vec![None],
    };
    let mut jobs = Vec::with_capacity(xs.len() * ys.len());
    for (row, y) in ys.iter().enumerate() {
        for (col, &x) in xs.iter().enumerate() {
            let mut spec = apply(&base, sweep.x.axis, x).config()?;
            if let (Some(axis), Some(y)) = (&sweep.y, y) {
                spec = apply(&spec, axis.axis, *y).config()?;
            }
            jobs.push(Job { row, col, x, y: *y, spec });
        }
    }
    let solver = SolverConfig {
        t_end: sweep.t_end,
        waive_compatibility: sweep.waive_compatibility,
        ..ctx.cfg.solver.clone()
    };
    solver.validate().map_err(crate::commands::pde_failure)?;

    let work = || -> Vec<Cell> {
        jobs.par_iter()
            .map(|job| run_cell(ctx, sweep, &solver, job))
            .collect()
    };
    let cells = match ctx.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Failure::Config(e.into()))?
            .install(work),
        None => work(),
    };

    let count = |f: &dyn Fn(&Cell) -> bool| cells.iter().filter(|c| f(c)).count();
    let summary = json!({
        "cells": cells.len(),
        "simulated_global": count(&|c| c.simulated == "ReachedTEnd"),
        "simulated_blowup": count(&|c| c.simulated == "BlowUpDetected" || c.simulated == "StepCollapse"),
        "agree": count(&|c| c.agreement == Agreement::Yes),
        "disagree": count(&|c| c.agreement == Agreement::No),
        "no_prediction": count(&|c| c.agreement == Agreement::Na),
        "errors": count(&|c| c.error.is_some()),
    });
    let mut out = Outputs::new(&ctx.out, ctx.reproducible).numeric()?;
    out.text("regime_map.csv", &regime_csv(&cells)).numeric()?;
    out.json("sweep.json", &json!({ "summary": summary, "cells": cells })).numeric()?;
    let parameters = json!({ "config": ctx.cfg.resolved().config()?, "args": {} });
    out.finish("sweep", parameters).numeric()?;
    println!("{summary}");
    Ok(Status::Ok)
}
