//! One function per command. Each returns the full output text; nothing is
//! written until the command has finished.

use anyhow::{bail, Context, Result};
use cyclide_core::catalog::{CanonicalCoeffs, SurfaceParams};
use cyclide_core::error::Error;
use cyclide_core::intersect::trace_cyclide_intersection;
use cyclide_core::invariants::{classify, isothermic_residual, Analyzer, Classification, InvariantSample};
use cyclide_core::io::cell;
use cyclide_core::lines::{
    darboux_critical_points, integrate_darboux_line, integrate_dupin_lines, CriticalPoint, CurveTrace, DupinLineOptions,
    SigmaMode, Termination,
};
use cyclide_core::osculation::{osculate_at, osculating_psi, table1, verify_contact_order, DupinSign};
use cyclide_core::prescribe::{
    integrability_residuals, prescribe, read_grid_csv, structural_residuals, write_grid_csv, EquationResidual, GridShape,
    HelcatFields, ResidualReport,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Canonical coefficients used by `intersect` without a surface file.
pub const DEFAULT_CANONICAL: [f64; 7] = [1.0, 2.0, 0.0, 3.5, 0.25, -0.5, -3.25];

/// Finished output plus one-line notes for stderr.
pub struct Output {
    pub body: String,
    pub notes: Vec<String>,
}

impl Output {
    fn new(body: String) -> Self {
        Self { body, notes: Vec::new() }
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json_text(cfg: &RunConfig, key: &str, value: serde_json::Value) -> Result<String> {
    let mut doc = json!({ "tool": "cyclide", "version": VERSION, "config": cfg });
    doc[key] = value;
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), cell)
}

fn analyzer(cfg: &RunConfig) -> Result<Analyzer> {
    Ok(Analyzer::new(cfg.entry()?.patch.clone()).with_tolerances(cfg.tolerances))
}

fn seeds(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    if cfg.seeds.is_empty() {
        bail!("this command needs at least one --seed u,v");
    }
    Ok(cfg.seeds.iter().map(|s| (s[0], s[1])).collect())
}

pub fn run(cfg: &RunConfig) -> Result<Output> {
    use crate::config::Command::*;
    match cfg.command {
        Invariants => invariants(cfg),
        Classify => classify_grid(cfg),
        Osculate => osculate(cfg),
        DupinLines => dupin_lines(cfg),
        Darboux => darboux(cfg),
        Intersect => intersect(cfg),
        Prescribe => prescribe_cmd(cfg),
        Verify => verify(cfg),
        Table1 => table(cfg),
    }
}

pub const INVARIANT_COLUMNS: [&str; 14] =
    ["u", "v", "k1", "k2", "H", "mu", "theta1", "theta2", "psi", "a", "b", "c", "d", "class"];

/// One invariants row; `None` marks a masked value.
#[derive(Serialize)]
struct InvariantRow {
    u: f64,
    v: f64,
    k1: Option<f64>,
    k2: Option<f64>,
    #[serde(rename = "H")]
    h: Option<f64>,
    mu: Option<f64>,
    theta1: Option<f64>,
    theta2: Option<f64>,
    psi: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    d: Option<f64>,
    class: Option<&'static str>,
}

impl InvariantRow {
    fn masked(u: f64, v: f64) -> Self {
        Self {
            u,
            v,
            k1: None,
            k2: None,
            h: None,
            mu: None,
            theta1: None,
            theta2: None,
            psi: None,
            a: None,
            b: None,
            c: None,
            d: None,
            class: None,
        }
    }

    fn full(s: &InvariantSample) -> Self {
        Self {
            u: s.u,
            v: s.v,
            k1: Some(s.k1),
            k2: Some(s.k2),
            h: Some(s.h),
            mu: Some(s.mu),
            theta1: Some(s.theta1),
            theta2: Some(s.theta2),
            psi: Some(s.psi),
            a: Some(s.a),
            b: Some(s.b),
            c: Some(s.c),
            d: Some(s.d),
            class: Some(s.classification.label()),
        }
    }

    fn cells(&self) -> Vec<String> {
        let mut r = vec![cell(self.u), cell(self.v)];
        for x in [self.k1, self.k2, self.h, self.mu, self.theta1, self.theta2, self.psi, self.a, self.b, self.c, self.d] {
            r.push(opt(x));
        }
        r.push(self.class.unwrap_or("").to_string());
        r
    }
}

/// A sample that failed past the frame keeps its first-order columns.
fn partial_row(an: &Analyzer, u: f64, v: f64, err: &Error) -> InvariantRow {
    let mut row = InvariantRow::masked(u, v);
    if let Error::UmbilicPoint { .. } = err {
        row.class = Some(Classification::Umbilic.label());
        return row;
    }
    if let Ok(fr) = an.frame(u, v, None) {
        row.k1 = Some(fr.pd.k1);
        row.k2 = Some(fr.pd.k2);
        row.h = Some(fr.pd.h);
        row.mu = Some(fr.pd.mu);
        row.theta1 = Some(fr.theta1);
        row.theta2 = Some(fr.theta2);
        row.class = Some(classify(fr.theta1, fr.theta2, an.tol.canal).label());
    }
    row
}

fn invariants(cfg: &RunConfig) -> Result<Output> {
    let an = analyzer(cfg)?;
    let domain = cfg.domain()?;
    let pts = domain.grid(cfg.grid[0], cfg.grid[1]);
    let samples = an.sweep_grid(&domain, cfg.grid[0], cfg.grid[1], cfg.mode());
    let rows: Vec<InvariantRow> = samples
        .iter()
        .zip(&pts)
        .map(|(s, &(u, v))| match s {
            Ok(s) => InvariantRow::full(s),
            Err(e) => partial_row(&an, u, v, e),
        })
        .collect();
    let masked = rows.iter().filter(|r| r.psi.is_none()).count();
    let body = match cfg.format {
        Format::Csv => csv_text(&INVARIANT_COLUMNS, rows.iter().map(InvariantRow::cells))?,
        Format::Json => json_text(cfg, "rows", serde_json::to_value(&rows)?)?,
    };
    let mut out = Output::new(body);
    out.notes.push(format!("{} points, {masked} with masked invariants", rows.len()));
    Ok(out)
}

fn classify_grid(cfg: &RunConfig) -> Result<Output> {
    let an = analyzer(cfg)?;
    let pts = cfg.domain()?.grid(cfg.grid[0], cfg.grid[1]);
    let rows = cfg.mode().map_items(&pts, |&(u, v)| match an.frame(u, v, None) {
        Ok(fr) => (u, v, Some(fr.theta1), Some(fr.theta2), Some(classify(fr.theta1, fr.theta2, an.tol.canal).label())),
        Err(Error::UmbilicPoint { .. }) => (u, v, None, None, Some(Classification::Umbilic.label())),
        Err(_) => (u, v, None, None, None),
    });
    let body = match cfg.format {
        Format::Csv => csv_text(
            &["u", "v", "theta1", "theta2", "class"],
            rows.iter().map(|r| vec![cell(r.0), cell(r.1), opt(r.2), opt(r.3), r.4.unwrap_or("").to_string()]),
        )?,
        Format::Json => {
            let v: Vec<_> =
                rows.iter().map(|r| json!({"u": r.0, "v": r.1, "theta1": r.2, "theta2": r.3, "class": r.4})).collect();
            json_text(cfg, "rows", v.into())?
        }
    };
    Ok(Output::new(body))
}

#[derive(Serialize)]
struct OsculateRow {
    seed: usize,
    u: f64,
    v: f64,
    position: [f64; 3],
    t: f64,
    alpha: f64,
    psi_c: f64,
    limit_derived: bool,
    fit_order: Option<u32>,
    fit_slope: Option<f64>,
    fit_exact: bool,
}

fn osculate(cfg: &RunConfig) -> Result<Output> {
    let an = analyzer(cfg)?;
    let seeds = seeds(cfg)?;
    let results = cfg.mode().map_items(&seeds, |&(u, v)| -> cyclide_core::Result<OsculateRow> {
        let c = osculate_at(&an, u, v, DupinSign::Cubic)?;
        // The contact fit is a measurement: failures leave its columns empty.
        let fit = verify_contact_order(&an.surface, &c).ok();
        Ok(OsculateRow {
            seed: 0,
            u,
            v,
            position: c.position,
            t: c.t,
            alpha: c.alpha,
            psi_c: c.psi_c,
            limit_derived: c.direction.limit_derived,
            fit_order: fit.filter(|f| !f.exact).map(|f| f.order),
            fit_slope: fit.filter(|f| !f.exact).map(|f| f.slope),
            fit_exact: fit.is_some_and(|f| f.exact),
        })
    });
    let mut rows = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        let mut r = r.with_context(|| format!("seed {k} ({}, {})", seeds[k].0, seeds[k].1))?;
        r.seed = k;
        rows.push(r);
    }
    let body = match cfg.format {
        Format::Csv => csv_text(
            &["seed", "u", "v", "x", "y", "z", "t", "alpha", "psi_c", "limit_derived", "fit_order", "fit_slope", "fit_exact"],
            rows.iter().map(|r| {
                vec![
                    r.seed.to_string(),
                    cell(r.u),
                    cell(r.v),
                    cell(r.position[0]),
                    cell(r.position[1]),
                    cell(r.position[2]),
                    cell(r.t),
                    cell(r.alpha),
                    cell(r.psi_c),
                    r.limit_derived.to_string(),
                    r.fit_order.map_or(String::new(), |o| o.to_string()),
                    opt(r.fit_slope),
                    r.fit_exact.to_string(),
                ]
            }),
        )?,
        Format::Json => json_text(cfg, "contacts", serde_json::to_value(&rows)?)?,
    };
    Ok(Output::new(body))
}

pub const TRACE_COLUMNS: [&str; 7] = ["curve_id", "k", "u", "v", "x", "y", "z"];

fn trace_csv(traces: &[CurveTrace], angles: bool) -> Result<String> {
    let mut header = TRACE_COLUMNS.to_vec();
    if angles {
        header.extend(["alpha", "sigma"]);
    }
    let rows = traces.iter().enumerate().flat_map(|(id, t)| {
        t.samples.iter().enumerate().map(move |(k, s)| {
            let mut r = vec![
                id.to_string(),
                k.to_string(),
                cell(s.u),
                cell(s.v),
                cell(s.position[0]),
                cell(s.position[1]),
                cell(s.position[2]),
            ];
            if angles {
                r.push(opt(s.alpha));
                r.push(opt(s.sigma));
            }
            r
        })
    });
    csv_text(&header, rows)
}

fn termination(t: Termination) -> &'static str {
    match t {
        Termination::ReachedLength => "reached-length",
        Termination::HitBoundary => "hit-boundary",
        Termination::HitSingularPoint => "hit-singular-point",
        Termination::Closed => "closed",
    }
}

fn trace_notes(traces: &[CurveTrace]) -> Vec<String> {
    traces
        .iter()
        .enumerate()
        .map(|(id, t)| {
            format!(
                "curve {id}: {} samples, length {}, closed {}, {}",
                t.samples.len(),
                cell(t.length()),
                t.closed,
                termination(t.termination)
            )
        })
        .collect()
}

fn collect_traces(results: Vec<cyclide_core::Result<CurveTrace>>, seeds: &[(f64, f64)]) -> Result<Vec<CurveTrace>> {
    results
        .into_iter()
        .enumerate()
        .map(|(k, r)| r.with_context(|| format!("seed {k} ({}, {})", seeds[k].0, seeds[k].1)))
        .collect()
}

fn dupin_lines(cfg: &RunConfig) -> Result<Output> {
    let an = analyzer(cfg)?;
    let seeds = seeds(cfg)?;
    let results = integrate_dupin_lines(&an, &seeds, cfg.step, cfg.max_length, DupinLineOptions::default(), cfg.mode());
    let traces = collect_traces(results, &seeds)?;
    let body = match cfg.format {
        Format::Csv => trace_csv(&traces, false)?,
        Format::Json => {
            let curves: Vec<_> = traces
                .iter()
                .enumerate()
                .map(|(id, t)| {
                    json!({
                        "curve_id": id,
                        "closed": t.closed,
                        "termination": termination(t.termination),
                        "length": t.length(),
                        "samples": t.samples,
                    })
                })
                .collect();
            json_text(cfg, "curves", curves.into())?
        }
    };
    Ok(Output { body, notes: trace_notes(&traces) })
}

fn darboux(cfg: &RunConfig) -> Result<Output> {
    let an = analyzer(cfg)?;
    let seeds = seeds(cfg)?;
    let sigma = SigmaMode::CurvatureGap;
    let results = cfg
        .mode()
        .map_items(&seeds, |&s| integrate_darboux_line(&an, s, cfg.alpha0, cfg.step, cfg.max_length, sigma));
    let traces = collect_traces(results, &seeds)?;
    let body = match cfg.format {
        Format::Csv => trace_csv(&traces, true)?,
        Format::Json => {
            let curves: Vec<_> = traces
                .iter()
                .enumerate()
                .map(|(id, t)| {
                    let critical: Option<Vec<CriticalPoint>> =
                        darboux_critical_points(&an, t, sigma, DupinSign::Cubic).ok();
                    json!({
                        "curve_id": id,
                        "termination": termination(t.termination),
                        "length": t.length(),
                        "critical_points": critical,
                        "samples": t.samples,
                    })
                })
                .collect();
            json_text(cfg, "curves", curves.into())?
        }
    };
    Ok(Output { body, notes: trace_notes(&traces) })
}

fn canonical_coeffs(cfg: &RunConfig) -> Result<CanonicalCoeffs> {
    match &cfg.surface {
        None => {
            let c = DEFAULT_CANONICAL;
            Ok(CanonicalCoeffs::new(c[0], c[1], c[2], c[3], c[4], c[5], c[6]))
        }
        Some(SurfaceParams::Canonical(c)) => Ok(*c),
        Some(_) => bail!("intersect needs a canonical surface (kind = canonical)"),
    }
}

fn intersect(cfg: &RunConfig) -> Result<Output> {
    let c = canonical_coeffs(cfg)?;
    let psi_c = match cfg.psi_c {
        Some(p) => p,
        None => {
            if c.theta1.abs() < cfg.tolerances.canal || c.theta2.abs() < cfg.tolerances.canal {
                bail!("no osculating value at a canal or Dupin point; pass --psi-c");
            }
            let t = DupinSign::Cubic.t_from_ratio(c.theta1 / c.theta2);
            osculating_psi(t, c.psi, [c.a, c.b, c.c, c.d])
        }
    };
    let resolution = cfg.grid[0].max(cfg.grid[1]);
    let set = trace_cyclide_intersection(c, psi_c, cfg.window, resolution, cfg.mode())?;
    let graph = c.graph();
    let height = |x: f64, y: f64| -> f64 {
        graph.terms.iter().map(|&(i, j, a)| a * x.powi(i as i32) * y.powi(j as i32)).sum()
    };
    let body = match cfg.format {
        Format::Csv => {
            let rows = set.polylines.iter().enumerate().flat_map(|(id, p)| {
                p.points.iter().enumerate().map(move |(k, q)| {
                    vec![
                        id.to_string(),
                        k.to_string(),
                        cell(q[0]),
                        cell(q[1]),
                        cell(q[0]),
                        cell(q[1]),
                        cell(height(q[0], q[1])),
                    ]
                })
            });
            csv_text(&TRACE_COLUMNS, rows)?
        }
        Format::Json => json_text(cfg, "curves", json!({ "psi_c": psi_c, "set": set }))?,
    };
    let mut out = Output::new(body);
    out.notes.push(format!(
        "psi_c {}, {} polylines, {} components, origin component {}",
        cell(psi_c),
        set.polylines.len(),
        set.components,
        set.origin_component_index.map_or("none".to_string(), |k| k.to_string())
    ));
    Ok(out)
}

fn prescribe_cmd(cfg: &RunConfig) -> Result<Output> {
    let alpha_h = match &cfg.surface {
        None => 0.0,
        Some(SurfaceParams::Helcat { alpha_h }) => *alpha_h,
        Some(_) => bail!("prescribe builds its data from a helcat (kind = helcat)"),
    };
    // With a surface file the helcat patch domain is in (s, t); the grid
    // lives in the prescriber plane, so only an explicit --range applies.
    let d = if cfg.surface.is_some() && cfg.domain == cfg.entry.as_ref().map(|e| e.patch.domain) {
        cyclide_core::surface::Domain::new(-1.0, 1.0, -1.0, 1.0)
    } else {
        cfg.domain()?
    };
    let shape = GridShape::new(cfg.grid[0], cfg.grid[1], [d.u_min, d.v_min], d.u_max - d.u_min, d.v_max - d.v_min)?;
    let inputs = HelcatFields { alpha_h }.inputs(&shape);
    let outcome = prescribe(&shape, &inputs, &cfg.tolerances, cfg.mode())?;
    let body = match cfg.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_grid_csv(&outcome.prescription.grid, &mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Json => json_text(
            cfg,
            "report",
            json!({
                "realizable": outcome.realizable,
                "verdicts": outcome.verdicts,
                "residuals": outcome.prescription.report().equations,
                "baseline": outcome.baseline.equations,
                "theta2_gap": outcome.prescription.theta2_gap,
            }),
        )?,
    };
    let mut out = Output::new(body);
    out.notes.push(format!("realizable: {}", outcome.realizable));
    for v in &outcome.verdicts {
        out.notes.push(format!(
            "{}: max {} vs {} {}",
            v.equation,
            cell(v.max_norm),
            cell(v.tol_real),
            if v.pass { "pass" } else { "fail" }
        ));
    }
    Ok(out)
}

pub const RESIDUAL_COLUMNS: [&str; 6] = ["equation", "max_norm", "rms", "h1", "h2", "margin"];

fn residual_output(cfg: &RunConfig, report: &ResidualReport, extra: serde_json::Value) -> Result<String> {
    match cfg.format {
        Format::Csv => csv_text(
            &RESIDUAL_COLUMNS,
            report.equations.iter().map(|e| {
                vec![e.equation.clone(), cell(e.max_norm), cell(e.rms), cell(e.h1), cell(e.h2), e.margin.to_string()]
            }),
        ),
        Format::Json => {
            let mut v = json!({ "equations": report.equations, "order": report.order });
            if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
                obj.extend(more);
            }
            json_text(cfg, "report", v)
        }
    }
}

/// Residuals of a prescriber grid file, or pointwise identities on a surface.
fn verify(cfg: &RunConfig) -> Result<Output> {
    if let Some(path) = &cfg.input {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut grid = read_grid_csv(std::io::BufReader::new(file))?;
        if grid.b.is_none() || grid.c.is_none() {
            grid.fill_bc()?;
        }
        // A fully masked Ψ column leaves the Ψ equations masked.
        if grid.psi.is_none() {
            grid.psi = Some(vec![f64::NAN; grid.shape.len()]);
        }
        let mut report = structural_residuals(&grid, cfg.mode())?;
        match integrability_residuals(&grid, cfg.mode()) {
            Ok(r) => report.extend(r),
            // Integrability needs κ; grids without θ's or κ only get the structural checks.
            Err(Error::MissingField(_)) => {}
            Err(e) => return Err(e.into()),
        }
        return Ok(Output::new(residual_output(cfg, &report, json!({}))?));
    }
    verify_surface(cfg)
}

fn verify_surface(cfg: &RunConfig) -> Result<Output> {
    let an = analyzer(cfg)?;
    let pts: Vec<(f64, f64)> = if cfg.seeds.is_empty() {
        // Interior grid: the outer ring would put stencils outside the patch.
        let d = cfg.domain()?;
        let (n1, n2) = (cfg.grid[0], cfg.grid[1]);
        let (du, dv) = ((d.u_max - d.u_min) / (n1 + 1) as f64, (d.v_max - d.v_min) / (n2 + 1) as f64);
        cyclide_core::surface::Domain::new(d.u_min + du, d.u_max - du, d.v_min + dv, d.v_max - dv).grid(n1, n2)
    } else {
        seeds(cfg)?
    };
    let mode = cfg.mode();
    let bracket = mode.map_items(&pts, |&(u, v)| an.bracket_residual(u, v).ok());
    let cross = mode.map_items(&pts, |&(u, v)| {
        let s = an.sample(u, v).ok()?;
        let p = an.psi_from_thetas(u, v).ok()?;
        Some((p - s.psi).abs() / s.psi.abs().max(1.0))
    });
    let iso = mode.map_items(&pts, |&(u, v)| isothermic_residual(&an, &[(u, v)], cyclide_core::exec::ExecMode::Sequential).ok());
    let h = an.diff.h_fld;
    let norms = |equation: &str, vals: &[Option<f64>]| {
        let v: Vec<f64> = vals.iter().flatten().copied().collect();
        let (max_norm, rms) = if v.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (v.iter().fold(0.0f64, |m, x| m.max(x.abs())), (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt())
        };
        (EquationResidual { equation: equation.into(), max_norm, rms, h1: h, h2: h, margin: 0, cells: v.len() }, v.len())
    };
    let checks = [
        ("bracket", bracket, cfg.tolerances.id),
        ("psi_from_thetas", cross, cfg.tolerances.xcheck),
        ("isothermic", iso, cfg.tolerances.id),
    ];
    let mut report = ResidualReport { equations: Vec::new(), order: 2 };
    let mut verdicts = Vec::new();
    let mut notes = Vec::new();
    for (name, vals, tol) in &checks {
        let (r, n) = norms(name, vals);
        let pass = if n == 0 { None } else { Some(r.max_norm < *tol) };
        notes.push(format!(
            "{name}: {n}/{} points, max {} (tol {}) {}",
            pts.len(),
            cell(r.max_norm),
            cell(*tol),
            match pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "masked",
            }
        ));
        verdicts.push(json!({ "equation": name, "points": n, "tol": tol, "pass": pass }));
        report.equations.push(r);
    }
    let body = residual_output(cfg, &report, json!({ "verdicts": verdicts }))?;
    Ok(Output { body, notes })
}

fn table(cfg: &RunConfig) -> Result<Output> {
    let cells = table1();
    let body = match cfg.format {
        Format::Csv => csv_text(
            &["alpha", "alpha_h", "s", "computed", "printed", "abs_gap", "rel_gap", "within_tolerance", "limit_derived", "note"],
            cells.iter().map(|c| {
                vec![
                    c.alpha_label.clone(),
                    cell(c.alpha_h),
                    cell(c.s),
                    cell(c.computed),
                    cell(c.printed),
                    cell(c.abs_gap),
                    cell(c.rel_gap),
                    c.within_tolerance.to_string(),
                    c.limit_derived.to_string(),
                    c.note.clone().unwrap_or_default(),
                ]
            }),
        )?,
        Format::Json => json_text(cfg, "cells", serde_json::to_value(&cells)?)?,
    };
    let matched = cells.iter().filter(|c| c.within_tolerance).count();
    let mut out = Output::new(body);
    out.notes.push(format!("{matched}/{} cells within tolerance", cells.len()));
    Ok(out)
}
