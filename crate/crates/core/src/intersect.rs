//! Tangent-sphere sections and intersection curves of a canonical surface
//! with the cyclide pencil, traced by marching squares in the tangent plane.

use std::collections::HashMap;

use nalgebra::{DMatrix, Schur};
use serde::Serialize;

use crate::catalog::CanonicalCoeffs;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::surface::{principal_data_aligned, SurfacePatch, Vec3, DEFAULT_TOL_UMB};

/// Predicted crossing angle 2α of the two curves cut from a surface by the
/// tangent sphere of normal curvature cos²α k₁ + sin²α k₂.
pub fn sphere_section_angle(k1: f64, k2: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, pi/2]")));
    }
    let gap = (k1 - k2).abs();
    if gap < DEFAULT_TOL_UMB * k1.abs().max(k2.abs()).max(1.0) {
        return Err(Error::UmbilicPoint { gap });
    }
    Ok(2.0 * alpha)
}

/// Measured crossing angle at (u, v) between the two branches of the
/// surface's intersection with the tangent sphere Σ_α. The difference of
/// heights over the tangent plane is sampled on a circle of radius `rho`; its
/// zero directions bound the sector containing X₁, whose opening is returned.
pub fn measured_section_angle(surface: &SurfacePatch, u: f64, v: f64, alpha: f64, rho: f64) -> Result<f64> {
    let jet = surface.eval_jet(u, v, 2)?;
    let pd = principal_data_aligned(&jet, None, DEFAULT_TOL_UMB)?;
    let k = alpha.cos().powi(2) * pd.k1 + alpha.sin().powi(2) * pd.k2;
    let p = jet.position();
    let (e1, e2, n) = (pd.x1_amb, pd.x2_amb, pd.normal);
    let diff = |phi: f64| -> Result<f64> {
        let (x, y) = (rho * phi.cos(), rho * phi.sin());
        let z = tangent_height(surface, (u, v), p, e1, e2, n, x, y)?;
        let r2 = x * x + y * y;
        let disc = 1.0 - k * k * r2;
        if disc <= 0.0 {
            return Err(Error::InvalidInput("sampling radius exceeds the sphere".into()));
        }
        Ok(z - k * r2 / (1.0 + disc.sqrt()))
    };
    const SAMPLES: usize = 720;
    let step = std::f64::consts::TAU / SAMPLES as f64;
    let mut vals = Vec::with_capacity(SAMPLES + 1);
    for i in 0..=SAMPLES {
        vals.push(diff(i as f64 * step)?);
    }
    let mut dirs = Vec::new();
    for i in 0..SAMPLES {
        if (vals[i] >= 0.0) != (vals[i + 1] >= 0.0) {
            let (mut a, mut b, fa) = (i as f64 * step, (i + 1) as f64 * step, vals[i]);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (diff(m)? >= 0.0) == (fa >= 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            let phi = 0.5 * (a + b);
            // Line direction in (−π/2, π/2].
            let mut d = phi.rem_euclid(std::f64::consts::PI);
            if d > std::f64::consts::FRAC_PI_2 {
                d -= std::f64::consts::PI;
            }
            dirs.push(d);
        }
    }
    let upper = dirs.iter().copied().filter(|d| *d > 0.0).fold(f64::NAN, f64::min);
    let lower = dirs.iter().copied().filter(|d| *d <= 0.0).fold(f64::NAN, f64::max);
    if upper.is_nan() || lower.is_nan() {
        // Tangential contact without a sign change: the two branches merge
        // along the direction where |F| is smallest.
        let k = (0..SAMPLES).min_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap()).unwrap();
        let mut d = (k as f64 * step).rem_euclid(std::f64::consts::PI);
        if d > std::f64::consts::FRAC_PI_2 {
            d -= std::f64::consts::PI;
        }
        return Ok(2.0 * d.abs());
    }
    Ok(upper - lower)
}

/// Height over the tangent plane (p; e1, e2, n) of the surface point whose
/// tangent-plane projection is (x, y), by Newton from `uv`.
#[allow(clippy::too_many_arguments)]
fn tangent_height(surface: &SurfacePatch, uv: (f64, f64), p: Vec3, e1: Vec3, e2: Vec3, n: Vec3, x: f64, y: f64) -> Result<f64> {
    let (mut u, mut v) = uv;
    for _ in 0..50 {
        let j = surface.jet_unchecked(u, v, 1)?;
        let d = j.position() - p;
        let (fx, fy) = (d.dot(&e1) - x, d.dot(&e2) - y);
        let (ru, rv) = (j.d(1, 0), j.d(0, 1));
        let (a, b, c, dd) = (ru.dot(&e1), rv.dot(&e1), ru.dot(&e2), rv.dot(&e2));
        let det = a * dd - b * c;
        if det.abs() < 1e-300 {
            return Err(Error::DegenerateMetric);
        }
        let (su, sv) = ((dd * fx - b * fy) / det, (a * fy - c * fx) / det);
        u -= su;
        v -= sv;
        if su.abs() + sv.abs() < 1e-17 * (1.0 + u.abs() + v.abs()) {
            break;
        }
    }
    Ok((surface.position(u, v) - p).dot(&n))
}

/// F = z_S − z_C for the canonical surface truncated at order four and the
/// cyclide z = ½(x²−y²) + (x⁴−y⁴)/8 + Ψ_C x²y²/6.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PencilDifference {
    pub coeffs: CanonicalCoeffs,
    pub psi_c: f64,
}

impl PencilDifference {
    pub fn new(coeffs: CanonicalCoeffs, psi_c: f64) -> Self {
        Self { coeffs, psi_c }
    }

    /// Coefficients of x^{m−k} y^k in the degree-m part, m = 3 and 4 (the
    /// quadratic parts cancel).
    pub fn cubic(&self) -> [f64; 4] {
        let c = &self.coeffs;
        [c.theta1 / 6.0, 0.0, 0.0, c.theta2 / 6.0]
    }

    pub fn quartic(&self) -> [f64; 5] {
        let c = &self.coeffs;
        [c.a / 24.0 - 0.125, c.b / 6.0, c.psi / 4.0 - self.psi_c / 6.0, c.c / 6.0, c.d / 24.0 + 0.125]
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let c3 = self.cubic();
        let c4 = self.quartic();
        let cubic = x * x * (c3[0] * x + c3[1] * y) + y * y * (c3[2] * x + c3[3] * y);
        let quartic = c4[0] * x.powi(4)
            + c4[1] * x.powi(3) * y
            + c4[2] * x * x * y * y
            + c4[3] * x * y.powi(3)
            + c4[4] * y.powi(4);
        cubic + quartic
    }
}

/// Lowest nonvanishing homogeneous part of F and the directions of its real
/// linear factors, i.e. the tangents of the branches through the origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OriginBranches {
    pub order: usize,
    /// Tangent angles in [0, π), one per distinct real factor.
    pub tangents: Vec<f64>,
}

const COEFF_ZERO: f64 = 1e-14;

/// Real linear factors of Σ c_k x^{m−k} y^k. Returns None when every
/// coefficient vanishes.
pub fn real_factor_directions(coeffs: &[f64]) -> Option<Vec<f64>> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale < COEFF_ZERO {
        return None;
    }
    let m = coeffs.len() - 1;
    let mut dirs = Vec::new();
    // Trailing zero y-powers are factors of x: the vertical direction.
    let top = (0..=m).rev().find(|&k| coeffs[k].abs() > COEFF_ZERO * scale).unwrap();
    if top < m {
        dirs.push(std::f64::consts::FRAC_PI_2);
    }
    // Roots s = y/x of Σ_{k ≤ top} c_k s^k from the companion matrix.
    if top > 0 {
        let mut comp = DMatrix::<f64>::zeros(top, top);
        for i in 1..top {
            comp[(i, i - 1)] = 1.0;
        }
        for k in 0..top {
            comp[(k, top - 1)] = -coeffs[k] / coeffs[top];
        }
        match Schur::try_new(comp, 1e-15, 10_000) {
            Some(schur) => {
                for r in schur.complex_eigenvalues().iter() {
                    if r.im.abs() <= 1e-7 * (1.0 + r.re.abs()) {
                        dirs.push(r.re.atan().rem_euclid(std::f64::consts::PI));
                    }
                }
            }
            None => dirs.extend(scan_directions(coeffs)),
        }
    }
    dirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dirs.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    Some(dirs)
}

/// Zero directions of the binary form on a fine angular scan: sign changes
/// and near-zero local minima of |form|.
fn scan_directions(coeffs: &[f64]) -> Vec<f64> {
    const N: usize = 20_000;
    let m = coeffs.len() - 1;
    let form = |phi: f64| -> f64 {
        let (c, s) = (phi.cos(), phi.sin());
        coeffs.iter().enumerate().map(|(k, a)| a * c.powi((m - k) as i32) * s.powi(k as i32)).sum()
    };
    let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let step = std::f64::consts::PI / N as f64;
    let vals: Vec<f64> = (0..=N + 1).map(|i| form(i as f64 * step)).collect();
    let mut out = Vec::new();
    for i in 1..=N {
        let (a, b, c) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
        let sign_change = (vals[i] >= 0.0) != (vals[i + 1] >= 0.0);
        if sign_change || (b <= a && b < c && b < 1e-6 * scale) {
            out.push((i as f64 * step).rem_euclid(std::f64::consts::PI));
        }
    }
    out
}

pub fn origin_branches(f: &PencilDifference) -> Option<OriginBranches> {
    if let Some(t) = real_factor_directions(&f.cubic()) {
        return Some(OriginBranches { order: 3, tangents: t });
    }
    real_factor_directions(&f.quartic()).map(|t| OriginBranches { order: 4, tangents: t })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    /// Connected component this polyline belongs to.
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanarCurveSet {
    pub polylines: Vec<Polyline>,
    pub window: f64,
    pub resolution: usize,
    pub components: usize,
    /// Component containing the reference point (the origin).
    pub origin_component_index: Option<usize>,
    /// F vanishes identically: the surface is the cyclide.
    pub degenerate: bool,
    pub origin: Option<OriginBranches>,
    pub tol_iso: f64,
}

pub const MIN_RESOLUTION: usize = 16;
/// Subdivision of the cells around the origin.
pub const ORIGIN_REFINE: usize = 4;

/// Ratio of the quartic to the quadratic terms of the truncated surface at
/// the window edge; above 1 the truncation is not trusted.
pub fn truncation_ratio(coeffs: &CanonicalCoeffs, window: f64) -> (f64, f64) {
    let c = coeffs;
    let quartic = (c.a.abs() + 4.0 * c.b.abs() + 6.0 * c.psi.abs() + 4.0 * c.c.abs() + c.d.abs()) / 24.0 * window.powi(4);
    (quartic, 0.5 * window * window)
}

pub fn trace_cyclide_intersection(
    coeffs: CanonicalCoeffs,
    psi_c: f64,
    window: f64,
    resolution: usize,
    mode: ExecMode,
) -> Result<PlanarCurveSet> {
    if !(window > 0.0) {
        return Err(Error::InvalidInput("window must be positive".into()));
    }
    let (quartic, quadratic) = truncation_ratio(&coeffs, window);
    if quartic > quadratic {
        return Err(Error::WindowTooLarge { quartic, quadratic });
    }
    trace_unchecked(coeffs, psi_c, window, resolution, mode)
}

/// Edge-crossing identity on the lattice refined ORIGIN_REFINE times:
/// (vertical edge, line index, sub-edge index). Every crossing near the origin
/// collapses onto one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Origin,
    Edge(bool, i64, i64),
}

struct Lattice {
    f: PencilDifference,
    w: f64,
    /// Fine cells per side.
    m: i64,
}

impl Lattice {
    fn coord(&self, i: i64) -> f64 {
        self.w * (2 * i - self.m) as f64 / self.m as f64
    }

    fn at(&self, i: i64, j: i64) -> f64 {
        self.f.eval(self.coord(i), self.coord(j))
    }

    /// Crossing on the edge from fine node (i, j) spanning `len` fine cells
    /// along x (or y when `vertical`), given the endpoint values.
    fn crossing(&self, i: i64, j: i64, len: i64, vertical: bool, fa: f64, fb: f64) -> Option<(Key, [f64; 2])> {
        if (fa >= 0.0) == (fb >= 0.0) {
            return None;
        }
        let (x0, y0) = (self.coord(i), self.coord(j));
        let span = self.coord(i + len) - self.coord(i);
        let point = |s: f64| if vertical { [x0, y0 + s] } else { [x0 + s, y0] };
        let (mut a, mut b) = (0.0, span);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            let p = point(mid);
            if (self.f.eval(p[0], p[1]) >= 0.0) == (fa >= 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        let fa_ = {
            let p = point(a);
            self.f.eval(p[0], p[1]).abs()
        };
        let fb_ = {
            let p = point(b);
            self.f.eval(p[0], p[1]).abs()
        };
        let s = if fa_ <= fb_ { a } else { b };
        let p = point(s);
        if p[0].hypot(p[1]) < 1e-9 * self.w {
            return Some((Key::Origin, [0.0, 0.0]));
        }
        let fine = 2.0 * self.w / self.m as f64;
        let sub = ((s / fine).floor() as i64).clamp(0, len - 1);
        let key = if vertical { Key::Edge(true, i, j + sub) } else { Key::Edge(false, j, i + sub) };
        Some((key, p))
    }

    /// Segments of one cell with fine corner (i, j) and side `len`.
    fn cell(&self, i: i64, j: i64, len: i64, out: &mut Vec<[(Key, [f64; 2]); 2]>) {
        let v00 = self.at(i, j);
        let v10 = self.at(i + len, j);
        let v11 = self.at(i + len, j + len);
        let v01 = self.at(i, j + len);
        // Counter-clockwise: bottom, right, top, left.
        let e = [
            self.crossing(i, j, len, false, v00, v10),
            self.crossing(i + len, j, len, true, v10, v11),
            self.crossing(i, j + len, len, false, v01, v11),
            self.crossing(i, j, len, true, v00, v01),
        ];
        let hits: Vec<usize> = (0..4).filter(|&k| e[k].is_some()).collect();
        let mut push = |a: usize, b: usize| {
            let (ka, kb) = (e[a].unwrap(), e[b].unwrap());
            if ka.0 != kb.0 {
                out.push([ka, kb]);
            }
        };
        match hits.len() {
            2 => push(hits[0], hits[1]),
            4 => {
                let half = self.coord(i + len) - self.coord(i);
                let centre = self.f.eval(self.coord(i) + 0.5 * half, self.coord(j) + 0.5 * half);
                if (centre >= 0.0) == (v00 >= 0.0) {
                    push(0, 1);
                    push(2, 3);
                } else {
                    push(3, 0);
                    push(1, 2);
                }
            }
            _ => {}
        }
    }
}

/// Marching squares without the truncation check.
pub fn trace_unchecked(
    coeffs: CanonicalCoeffs,
    psi_c: f64,
    window: f64,
    resolution: usize,
    mode: ExecMode,
) -> Result<PlanarCurveSet> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooLow(resolution));
    }
    let f = PencilDifference::new(coeffs, psi_c);
    let tol_iso = 1e-9 * window.powi(4);
    let origin = origin_branches(&f);
    if origin.is_none() {
        return Ok(PlanarCurveSet {
            polylines: Vec::new(),
            window,
            resolution,
            components: 0,
            origin_component_index: None,
            degenerate: true,
            origin: None,
            tol_iso,
        });
    }
    let n = resolution as i64;
    let r = ORIGIN_REFINE as i64;
    let lat = Lattice { f, w: window, m: n * r };
    // Coarse cells whose closure contains the origin.
    let in_origin_block = |ci: i64| 2 * ci <= n && 2 * (ci + 1) >= n;
    let rows: Vec<Vec<[(Key, [f64; 2]); 2]>> = mode.map(resolution, |cj| {
        let cj = cj as i64;
        let mut segs = Vec::new();
        for ci in 0..n {
            if in_origin_block(ci) && in_origin_block(cj) {
                for sj in 0..r {
                    for si in 0..r {
                        lat.cell(ci * r + si, cj * r + sj, 1, &mut segs);
                    }
                }
            } else {
                lat.cell(ci * r, cj * r, r, &mut segs);
            }
        }
        segs
    });
    let segments: Vec<_> = rows.into_iter().flatten().collect();
    Ok(stitch(&segments, window, resolution, origin, tol_iso))
}

fn stitch(
    segments: &[[(Key, [f64; 2]); 2]],
    window: f64,
    resolution: usize,
    origin: Option<OriginBranches>,
    tol_iso: f64,
) -> PlanarCurveSet {
    let mut ids: HashMap<Key, usize> = HashMap::new();
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(segments.len());
    for seg in segments {
        let mut e = [0; 2];
        for (k, (key, p)) in seg.iter().enumerate() {
            e[k] = *ids.entry(*key).or_insert_with(|| {
                pts.push(*p);
                pts.len() - 1
            });
        }
        edges.push(e);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); pts.len()];
    for (s, e) in edges.iter().enumerate() {
        adj[e[0]].push(s);
        adj[e[1]].push(s);
    }
    // Components by union-find over nodes.
    let mut parent: Vec<usize> = (0..pts.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in &edges {
        let (a, b) = (find(&mut parent, e[0]), find(&mut parent, e[1]));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut comp_of_root: HashMap<usize, usize> = HashMap::new();
    let mut comp = vec![0; pts.len()];
    for node in 0..pts.len() {
        let root = find(&mut parent, node);
        let next = comp_of_root.len();
        comp[node] = *comp_of_root.entry(root).or_insert(next);
    }
    // Walk polylines: open chains start at nodes of degree ≠ 2, the rest are
    // cycles.
    let mut used = vec![false; edges.len()];
    let mut polylines = Vec::new();
    let walk = |start: usize, first: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut chain = vec![start];
        let (mut node, mut seg) = (start, first);
        loop {
            used[seg] = true;
            let e = edges[seg];
            node = if e[0] == node { e[1] } else { e[0] };
            chain.push(node);
            if node == start {
                return (chain, true);
            }
            if adj[node].len() != 2 {
                return (chain, false);
            }
            match adj[node].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => return (chain, false),
            }
        }
    };
    let mut starts: Vec<usize> = (0..pts.len()).filter(|&k| adj[k].len() != 2).collect();
    starts.extend((0..pts.len()).filter(|&k| adj[k].len() == 2));
    for start in starts {
        while let Some(&s) = adj[start].iter().find(|&&s| !used[s]) {
            let (chain, closed) = walk(start, s, &mut used);
            polylines.push(Polyline {
                points: chain.iter().map(|&k| pts[k]).collect(),
                closed,
                component: comp[start],
            });
        }
    }
    let origin_component_index = ids.get(&Key::Origin).map(|&k| comp[k]);
    PlanarCurveSet {
        polylines,
        window,
        resolution,
        components: comp_of_root.len(),
        origin_component_index,
        degenerate: false,
        origin,
        tol_iso,
    }
}
