//! Command-line arguments and the resolved run configuration.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use cyclide_core::catalog::{parse_angle, parse_range, CatalogEntry, SurfaceParams, SurfaceSpec};
use cyclide_core::exec::ExecMode;
use cyclide_core::invariants::{Analyzer, Tolerances};
use cyclide_core::surface::Domain;
use serde::Serialize;

/// Smallest grid resolution accepted on the command line.
pub const MIN_GRID: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sweep the conformal invariants over a grid.
    Invariants,
    /// Classify grid points as generic, canal, Dupin or umbilic.
    Classify,
    /// Osculating Dupin cyclide and measured contact order at each seed.
    Osculate,
    /// Trace Dupin lines from each seed.
    DupinLines,
    /// Trace Darboux lines from each seed.
    Darboux,
    /// Intersect a canonical surface with one of its cyclides.
    Intersect,
    /// Build a Dupin foliation from helcat data and judge realizability.
    Prescribe,
    /// Residuals of a grid file, or pointwise identities on a surface.
    Verify,
    /// Osculating values on the helcat family.
    Table1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cyclide", version, about = "Conformal invariants, osculating cyclides and Dupin foliations")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Surface specification file (key = value lines).
    #[arg(long)]
    pub surface: Option<PathBuf>,
    /// Grid CSV to check (verify).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Grid resolution N1xN2.
    #[arg(long)]
    pub grid: Option<String>,
    /// Parameter range u0:u1,v0:v1.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Seed point u,v; repeatable.
    #[arg(long = "seed", allow_hyphen_values = true)]
    pub seeds: Vec<String>,
    /// Initial Darboux angle (radians, or pi/x).
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: Option<String>,
    /// Ambient arc-length step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_length: Option<f64>,
    /// Cyclide invariant for intersect; the osculating value when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub psi_c: Option<f64>,
    /// Half-width of the intersection window.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub tol_umb: Option<f64>,
    #[arg(long)]
    pub tol_canal: Option<f64>,
    #[arg(long)]
    pub tol_gen: Option<f64>,
    #[arg(long)]
    pub tol_id: Option<f64>,
    #[arg(long)]
    pub tol_xcheck: Option<f64>,
    /// Run every batch on one thread.
    #[arg(long)]
    pub sequential: bool,
    /// On failure print a JSON error object on stdout.
    #[arg(long)]
    pub error_json: bool,
}

/// Everything a run depends on, after defaults are applied.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub surface_path: Option<PathBuf>,
    pub surface: Option<SurfaceParams>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub domain: Option<Domain>,
    pub grid: [usize; 2],
    pub seeds: Vec<[f64; 2]>,
    pub alpha0: f64,
    pub step: f64,
    pub max_length: f64,
    pub psi_c: Option<f64>,
    pub window: f64,
    pub tolerances: Tolerances,
    pub sequential: bool,
    #[serde(skip)]
    pub entry: Option<CatalogEntry>,
}

impl RunConfig {
    pub fn mode(&self) -> ExecMode {
        if self.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }

    pub fn entry(&self) -> Result<&CatalogEntry> {
        self.entry.as_ref().context("this command needs --surface")
    }

    pub fn domain(&self) -> Result<Domain> {
        self.domain.context("this command needs --surface or --range")
    }
}

fn default_grid(command: Command) -> [usize; 2] {
    match command {
        Command::Intersect => [128, 128],
        Command::Prescribe => [33, 33],
        Command::Verify => [9, 9],
        _ => [32, 32],
    }
}

pub fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let (a, b) = s.split_once(['x', 'X']).with_context(|| format!("bad grid `{s}` (want N1xN2)"))?;
    let n1: usize = a.trim().parse().with_context(|| format!("bad grid `{s}`"))?;
    let n2: usize = b.trim().parse().with_context(|| format!("bad grid `{s}`"))?;
    if n1 < MIN_GRID || n2 < MIN_GRID {
        bail!("grid {n1}x{n2} below the minimum resolution {MIN_GRID}");
    }
    Ok([n1, n2])
}

pub fn parse_seed(s: &str) -> Result<[f64; 2]> {
    let (u, v) = s.split_once(',').with_context(|| format!("bad seed `{s}` (want u,v)"))?;
    Ok([parse_angle(u)?, parse_angle(v)?])
}

/// Tolerance overrides written as `tol_<name> = value` in the spec file.
fn spec_tolerances(text: &str, mut tol: Tolerances) -> Result<Tolerances> {
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let Some((k, v)) = line.split_once('=') else { continue };
        let slot = match k.trim() {
            "tol_umb" => &mut tol.umb,
            "tol_canal" => &mut tol.canal,
            "tol_gen" => &mut tol.gen,
            "tol_id" => &mut tol.id,
            "tol_xcheck" => &mut tol.xcheck,
            _ => continue,
        };
        *slot = v.trim().parse().with_context(|| format!("bad tolerance `{}`", line))?;
    }
    Ok(tol)
}

fn inside(outer: &Domain, inner: &Domain) -> bool {
    let eps = 1e-12 * (1.0 + outer.u_max.abs().max(outer.v_max.abs()));
    inner.u_min >= outer.u_min - eps
        && inner.u_max <= outer.u_max + eps
        && inner.v_min >= outer.v_min - eps
        && inner.v_max <= outer.v_max + eps
        && inner.u_min < inner.u_max
        && inner.v_min < inner.v_max
}

impl Args {
    pub fn resolve(&self) -> Result<RunConfig> {
        // Surface defaults, then `tol_*` keys in the spec file, then flags.
        let (mut tol, spec, entry) = match &self.surface {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let spec = SurfaceSpec::parse(&text)?;
                let entry = spec.build()?;
                let base = Analyzer::new(entry.patch.clone()).tol;
                (spec_tolerances(&text, base)?, Some(spec), Some(entry))
            }
            None => (Tolerances::default(), None, None),
        };
        for (flag, slot) in [
            (self.tol_umb, &mut tol.umb),
            (self.tol_canal, &mut tol.canal),
            (self.tol_gen, &mut tol.gen),
            (self.tol_id, &mut tol.id),
            (self.tol_xcheck, &mut tol.xcheck),
        ] {
            if let Some(v) = flag {
                if !(v > 0.0) {
                    bail!("tolerances must be positive");
                }
                *slot = v;
            }
        }
        let range = self.range.as_deref().map(parse_range).transpose()?;
        let domain = match (&entry, range) {
            (Some(e), Some(r)) => {
                if !inside(&e.patch.domain, &r) {
                    bail!("range {:?} leaves the surface domain {:?}", r, e.patch.domain);
                }
                Some(r)
            }
            (Some(e), None) => Some(e.patch.domain),
            (None, Some(r)) => {
                if !(r.u_min < r.u_max && r.v_min < r.v_max) {
                    bail!("empty range");
                }
                Some(r)
            }
            (None, None) if self.command == Command::Prescribe => Some(Domain::new(-1.0, 1.0, -1.0, 1.0)),
            (None, None) => None,
        };
        let grid = match &self.grid {
            Some(g) => parse_grid(g)?,
            None => default_grid(self.command),
        };
        let seeds = self.seeds.iter().map(|s| parse_seed(s)).collect::<Result<Vec<_>>>()?;
        if let Some(d) = domain.filter(|_| entry.is_some()) {
            for s in &seeds {
                if !d.contains(s[0], s[1]) {
                    bail!("seed ({}, {}) is outside the domain", s[0], s[1]);
                }
            }
        }
        let alpha0 = match &self.alpha0 {
            Some(a) => parse_angle(a)?,
            None => std::f64::consts::PI / 6.0,
        };
        let step = self.step.unwrap_or(0.05);
        let max_length = self.max_length.unwrap_or(10.0);
        let window = self.window.unwrap_or(1.0);
        for (name, v) in [("step", step), ("max-length", max_length), ("window", window)] {
            if !(v > 0.0) {
                bail!("--{name} must be positive");
            }
        }
        Ok(RunConfig {
            command: self.command,
            surface_path: self.surface.clone(),
            surface: spec.map(|s| s.params),
            input: self.input.clone(),
            out: self.out.clone(),
            format: self.format,
            domain,
            grid,
            seeds,
            alpha0,
            step,
            max_length,
            psi_c: self.psi_c,
            window,
            tolerances: tol,
            sequential: self.sequential,
            entry,
        })
    }
}
