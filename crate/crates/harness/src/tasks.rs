//! One function per manifest task. Each returns a single record plus any
//! tables to be written next to the report.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstab_core::curvalg::{b_coefficient, binomial, newton_reilly, newton_seq, trace_identity_residuals, ShapeSample};
use rstab_core::families::{SurfaceFamily, VariationFamily};
use rstab_core::grid::FiberGrid;
use rstab_core::spacetime::GRWModel;
use rstab_core::stability::{probe_surface, stability_spectrum, support_identity_residual, Verdict};
use rstab_core::surface::{embed_graph, GraphFunction, SurfaceGeometry};
use rstab_core::variation::{
    cr_constant, first_variation_check, second_variation_check, volume_rate_check, VariationSpec,
};
use serde_json::{json, Value};

use crate::catalog::{probe_catalog, surface_json};
use crate::manifest::{Manifest, Task};
use crate::report::{Series, Status, Table, TaskRecord};

/// Samples drawn by the identities task.
pub const IDENTITY_SAMPLES: usize = 100;
const IDENTITY_TOL: f64 = 1e-9;
const ODE_TOL: f64 = 1e-10;

/// Everything a task needs, built once per run.
pub struct Context {
    pub manifest: Manifest,
    pub model: Arc<GRWModel>,
    /// Coarsest first.
    pub grids: Vec<Arc<FiberGrid>>,
}

pub struct Outcome {
    pub record: TaskRecord,
    pub tables: Vec<Table>,
}

struct Draft {
    status: Status,
    message: Option<String>,
    series: Vec<Series>,
    details: Value,
    tables: Vec<Table>,
}

impl Draft {
    fn from_series(series: Vec<Series>, details: Value, tables: Vec<Table>) -> Self {
        let failed: Vec<String> = series
            .iter()
            .filter(|s| !s.passed)
            .map(|s| match s.slope {
                Some(p) => format!("{} ({p:.2})", s.name),
                None => format!("{} (no slope)", s.name),
            })
            .collect();
        let (status, message) = if failed.is_empty() {
            (Status::Pass, None)
        } else {
            (Status::Fail, Some(format!("slope outside band: {}", failed.join(", "))))
        };
        Self {
            status,
            message,
            series,
            details,
            tables,
        }
    }
}

pub fn run_task(ctx: &Context, task: Task, r: Option<usize>) -> Outcome {
    let start = Instant::now();
    let result = match task {
        Task::Identities => Ok(identities(ctx)),
        Task::FirstVariation => first_variation(ctx, r.unwrap_or(0)),
        Task::SecondVariation => second_variation(ctx, r.unwrap_or(0)),
        Task::SupportIdentity => support_identity(ctx, r.unwrap_or(0)),
        Task::Spectrum => spectrum(ctx, r.unwrap_or(0)),
        Task::TheoremProbe => theorem_probe(ctx, r.unwrap_or(0)),
    };
    let draft = result.unwrap_or_else(|e| Draft {
        status: Status::Error,
        message: Some(e.to_string()),
        series: Vec::new(),
        details: Value::Null,
        tables: Vec::new(),
    });
    Outcome {
        record: TaskRecord {
            task: task.name().to_string(),
            r,
            status: draft.status,
            message: draft.message,
            series: draft.series,
            details: draft.details,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        tables: draft.tables,
    }
}

fn suffix(task: &str, r: usize) -> String {
    format!("{task}-r{r}.csv")
}

fn base_geometry(ctx: &Context, grid: &Arc<FiberGrid>) -> rstab_core::Result<SurfaceGeometry> {
    let surface = ctx.manifest.surface.as_ref().expect("validated: surface present");
    let u = GraphFunction::new(surface.sample(grid)?);
    embed_graph(ctx.model.clone(), grid.clone(), &u)
}

fn hs(ctx: &Context) -> Vec<f64> {
    ctx.grids.iter().map(|g| g.h()).collect()
}

/// Time step refined together with the grid.
fn time_step(ctx: &Context, level: usize) -> f64 {
    ctx.manifest.h_t * ctx.grids[level].h() / ctx.grids[0].h()
}

/// `(s0, a)` when the base is a slice and the speed is constant, the case
/// with closed forms.
fn slice_with_constant_speed(ctx: &Context) -> Option<(f64, f64)> {
    match (ctx.manifest.surface.as_ref()?, ctx.manifest.f0) {
        (SurfaceFamily::Slice { s0 }, VariationFamily::Const { a }) => Some((*s0, a)),
        _ => None,
    }
}

fn symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-3.0..3.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

fn identities(ctx: &Context) -> Draft {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.manifest.seed);
    let mut table = Table::new(
        "identities.csv".into(),
        &["sample", "n", "norm", "newton_error", "pn_residual", "trace_residual"],
    );
    let (mut worst_newton, mut worst_pn, mut worst_trace) = (0.0_f64, 0.0_f64, 0.0_f64);
    for k in 0..IDENTITY_SAMPLES {
        let n = 2 + k % 5;
        let a = symmetric(n, &mut rng);
        let norm = a.norm();
        let sample = ShapeSample::new(a).expect("symmetric by construction");
        let seq = newton_seq(&sample);
        let newton = (0..=n)
            .map(|r| {
                let oracle = newton_reilly(&sample, r).expect("n <= 6");
                (seq.get(r) - &oracle).amax() / (1.0 + oracle.amax())
            })
            .fold(0.0, f64::max);
        let scale = 1.0 + norm.powi(n as i32);
        let pn = seq.get(n).amax() / scale;
        let trace = trace_identity_residuals(&sample).max() / scale;
        worst_newton = worst_newton.max(newton);
        worst_pn = worst_pn.max(pn);
        worst_trace = worst_trace.max(trace);
        table.push(vec![
            k.to_string(),
            n.to_string(),
            norm.to_string(),
            newton.to_string(),
            pn.to_string(),
            trace.to_string(),
        ]);
    }
    let (lo, hi) = ctx.model.interval;
    let ode = (0..IDENTITY_SAMPLES)
        .map(|k| {
            let s = lo + (hi - lo) * k as f64 / (IDENTITY_SAMPLES - 1) as f64;
            let (a, b) = ctx.model.curvature_residuals(s).expect("constant-curvature model");
            a.abs().max(b.abs())
        })
        .fold(0.0, f64::max);
    let checks = [
        ("newton_recurrence_vs_expansion", worst_newton, IDENTITY_TOL),
        ("top_newton_vanishes", worst_pn, IDENTITY_TOL),
        ("trace_identities", worst_trace, IDENTITY_TOL),
        ("warping_ode", ode, ODE_TOL),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !(c.1 < c.2)).map(|c| c.0).collect();
    let details = json!({
        "samples": IDENTITY_SAMPLES,
        "checks": checks.iter().map(|(name, v, tol)| json!({"name": name, "max": v, "tolerance": tol})).collect::<Vec<_>>(),
    });
    Draft {
        status: if failed.is_empty() { Status::Pass } else { Status::Fail },
        message: (!failed.is_empty()).then(|| format!("above tolerance: {}", failed.join(", "))),
        series: Vec::new(),
        details,
        tables: vec![table],
    }
}

fn first_variation(ctx: &Context, r: usize) -> rstab_core::Result<Draft> {
    let n = ctx.model.n;
    let c = ctx.model.constant_curvature()?;
    let closed = slice_with_constant_speed(ctx);
    let (mut err, mut evo, mut vol, mut analytic, mut evo_analytic) = (vec![], vec![], vec![], vec![], vec![]);
    let mut levels = Vec::new();
    for (k, grid) in ctx.grids.iter().enumerate() {
        let base = base_geometry(ctx, grid)?;
        let h_t = time_step(ctx, k);
        let f0 = ctx.manifest.f0.sample(grid)?;
        let spec = VariationSpec::from_normal_speed(&base, f0, h_t)?;
        let rep = first_variation_check(&spec, r)?;
        let volume = volume_rate_check(&spec, &base)?;
        err.push(rep.error);
        evo.push(rep.evolution_max_residual);
        vol.push(volume.error);
        let mut level = json!({
            "resolution": [grid.spec.n1, grid.spec.n2],
            "h": grid.h(),
            "h_t": h_t,
            "fd": rep.fd,
            "formula": rep.formula,
            "error": rep.error,
            "evolution_max_residual": rep.evolution_max_residual,
            "transport_max": rep.transport.iter().map(|x| x.abs()).fold(0.0, f64::max),
            "volume": volume,
        });
        if let Some((s0, a)) = closed {
            let (phi, dphi, ddphi) = (ctx.model.phi(s0), ctx.model.dphi(s0), ctx.model.ddphi(s0));
            let ratio = dphi / phi;
            let area = grid.exact_fiber_volume() * phi.powi(n as i32);
            let value = a * area * ((r + 1) as f64 * binomial(n, r + 1) * ratio.powi(r as i32 + 1) + cr_constant(n, r, c)?);
            // d/ds of S_{r+1} = C(n, r+1) (-φ'/φ)^{r+1}.
            let d_ratio = (ddphi * phi - dphi * dphi) / (phi * phi);
            let ds = a * binomial(n, r + 1) * (r + 1) as f64 * (-ratio).powi(r as i32) * -d_ratio;
            analytic.push((rep.fd.value - value).abs());
            evo_analytic.push(rep.evolution_fd.iter().map(|v| (v - ds).abs()).fold(0.0, f64::max));
            level["analytic"] = json!(value);
            level["evolution_analytic"] = json!(ds);
        }
        levels.push(level);
    }
    let h = hs(ctx);
    let mut series = vec![
        Series::new("first-variation", h.clone(), err),
        Series::new("evolution-law", h.clone(), evo),
        Series::new("balance-of-volume", h.clone(), vol),
    ];
    if closed.is_some() {
        series.push(Series::new("analytic", h.clone(), analytic));
        series.push(Series::new("evolution-analytic", h, evo_analytic));
    }
    Ok(Draft::from_series(series, json!({ "levels": levels }), Vec::new()))
}

fn second_variation(ctx: &Context, r: usize) -> rstab_core::Result<Draft> {
    let n = ctx.model.n;
    let c = ctx.model.constant_curvature()?;
    let closed = slice_with_constant_speed(ctx);
    let (mut fd, mut op, mut analytic) = (vec![], vec![], vec![]);
    let mut levels = Vec::new();
    for (k, grid) in ctx.grids.iter().enumerate() {
        let base = base_geometry(ctx, grid)?;
        let h_t = time_step(ctx, k);
        let f0 = ctx.manifest.f0.sample(grid)?;
        let spec = VariationSpec::from_normal_speed(&base, f0, h_t)?;
        let rep = second_variation_check(&spec, r)?;
        fd.push(rep.error);
        op.push((rep.operator - rep.bilinear).abs());
        let mut level = json!({
            "resolution": [grid.spec.n1, grid.spec.n2],
            "h": grid.h(),
            "h_t": h_t,
            "fd": rep.fd,
            "bilinear": rep.bilinear,
            "operator": rep.operator,
            "error": rep.error,
            "h_deviation": rep.h_deviation,
            "lambda": rep.series.lambda,
        });
        if let Some((s0, a)) = closed {
            // Umbilic potential b_r (φ'/φ)^r (c - (φ'/φ)²) over the slice.
            let (phi, dphi) = (ctx.model.phi(s0), ctx.model.dphi(s0));
            let ratio = dphi / phi;
            let area = grid.exact_fiber_volume() * phi.powi(n as i32);
            let value = (r + 1) as f64 * a * a * b_coefficient(n, r) * ratio.powi(r as i32) * (c - ratio * ratio) * area;
            analytic.push((rep.fd.value - value).abs().max((rep.bilinear - value).abs()));
            level["analytic"] = json!(value);
        }
        levels.push(level);
    }
    let h = hs(ctx);
    let mut series = vec![
        Series::new("second-variation", h.clone(), fd),
        Series::new("operator", h.clone(), op),
    ];
    if closed.is_some() {
        series.push(Series::new("analytic", h, analytic));
    }
    Ok(Draft::from_series(series, json!({ "levels": levels }), Vec::new()))
}

fn support_identity(ctx: &Context, r: usize) -> rstab_core::Result<Draft> {
    let mut err = Vec::new();
    let mut levels = Vec::new();
    let mut table = Table::new(
        format!("support-identity-r{r}-nodes.csv"),
        &["node", "p1", "p2", "u", "lhs", "rhs", "residual"],
    );
    for (k, grid) in ctx.grids.iter().enumerate() {
        let base = base_geometry(ctx, grid)?;
        let rep = support_identity_residual(&base, r)?;
        err.push(rep.max_residual);
        levels.push(json!({
            "resolution": [grid.spec.n1, grid.spec.n2],
            "h": grid.h(),
            "max_residual": rep.max_residual,
            "normal_derivative_check": rep.normal_derivative_check,
        }));
        if k + 1 == ctx.grids.len() {
            for (i, p) in grid.params().iter().enumerate() {
                table.push(vec![
                    i.to_string(),
                    p[0].to_string(),
                    p[1].to_string(),
                    base.nodes[i].u.to_string(),
                    rep.lhs[i].to_string(),
                    rep.rhs[i].to_string(),
                    rep.residual[i].to_string(),
                ]);
            }
        }
    }
    let series = vec![Series::new("support-identity", hs(ctx), err)];
    Ok(Draft::from_series(series, json!({ "levels": levels }), vec![table]))
}

const ASYMMETRY_TOL: f64 = 1e-10;

fn spectrum(ctx: &Context, r: usize) -> rstab_core::Result<Draft> {
    let mut levels = Vec::new();
    let mut problems = Vec::new();
    let mut table = Table::new(suffix("spectrum", r), &["n1", "n2", "h", "k", "eigenvalue"]);
    for grid in &ctx.grids {
        let base = base_geometry(ctx, grid)?;
        let sp = stability_spectrum(&base, r, 3)?;
        if sp.asymmetry > ASYMMETRY_TOL {
            problems.push(format!("asymmetry {:.2e} at {}x{}", sp.asymmetry, grid.spec.n1, grid.spec.n2));
        }
        if sp.verdict == Verdict::Unstable && !sp.witness_value.is_some_and(|q| q > 0.0) {
            problems.push(format!("unstable without a positive witness at {}x{}", grid.spec.n1, grid.spec.n2));
        }
        for (k, v) in sp.values.iter().enumerate() {
            table.push(vec![
                grid.spec.n1.to_string(),
                grid.spec.n2.to_string(),
                grid.h().to_string(),
                k.to_string(),
                v.to_string(),
            ]);
        }
        levels.push(json!({
            "resolution": [grid.spec.n1, grid.spec.n2],
            "h": grid.h(),
            "spectrum": sp,
        }));
    }
    Ok(Draft {
        status: if problems.is_empty() { Status::Pass } else { Status::Fail },
        message: (!problems.is_empty()).then(|| problems.join("; ")),
        series: Vec::new(),
        details: json!({ "levels": levels }),
        tables: vec![table],
    })
}

fn theorem_probe(ctx: &Context, r: usize) -> rstab_core::Result<Draft> {
    let grid = ctx.grids.last().expect("validated: at least one grid");
    let surfaces = ctx
        .manifest
        .surfaces
        .clone()
        .unwrap_or_else(|| probe_catalog(ctx.manifest.model.kind));
    let mut rows = Vec::new();
    let mut table = Table::new(
        suffix("theorem-probe", r),
        &[
            "label",
            "is_slice",
            "is_r_maximal",
            "min_margin",
            "phi_prime_zero_fraction",
            "hypothesis_holds",
            "nondegenerate",
            "covered",
            "top_eigenvalue",
            "tolerance",
            "verdict",
            "witness_value",
            "consistent",
        ],
    );
    for s in &surfaces {
        let u = GraphFunction::new(s.sample(grid)?);
        let geom = embed_graph(ctx.model.clone(), grid.clone(), &u)?;
        let row = probe_surface(&s.label(), &geom, r)?;
        table.push(vec![
            row.label.clone(),
            row.is_slice.to_string(),
            row.is_r_maximal.to_string(),
            row.min_margin.to_string(),
            row.phi_prime_zero_fraction.to_string(),
            row.hypothesis_holds.to_string(),
            row.nondegenerate.to_string(),
            row.covered.to_string(),
            row.top_eigenvalue.to_string(),
            row.tolerance.to_string(),
            serde_json::to_value(row.verdict).unwrap().as_str().unwrap_or("").to_string(),
            row.witness_value.map(|q| q.to_string()).unwrap_or_default(),
            row.consistent.to_string(),
        ]);
        rows.push(json!({ "surface": surface_json(s), "row": row }));
    }
    let inconsistent: Vec<String> = rows
        .iter()
        .filter(|r| r["row"]["consistent"] == json!(false))
        .map(|r| r["row"]["label"].as_str().unwrap_or("").to_string())
        .collect();
    let details = json!({
        "resolution": [grid.spec.n1, grid.spec.n2],
        "surfaces": surfaces.len(),
        "rows": rows,
    });
    Ok(Draft {
        status: if inconsistent.is_empty() { Status::Pass } else { Status::Fail },
        message: (!inconsistent.is_empty()).then(|| format!("covered but not unstable: {}", inconsistent.join(", "))),
        series: Vec::new(),
        details,
        tables: vec![table],
    })
}
