//! Parametric surfaces, derivative jets, principal curvature data and
//! Möbius transformations of the ambient space.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::series::{factorial, Real, Taylor2};

pub type Vec3 = Vector3<f64>;

/// A parametrization written once over any [`Real`] scalar.
pub trait Parametrization: Send + Sync + Debug {
    fn eval<T: Real>(&self, u: T, v: T) -> [T; 3];
}

/// Object-safe evaluator: positions and Taylor expansions of the position.
pub trait SurfaceMap: Send + Sync + Debug {
    fn position(&self, u: f64, v: f64) -> Vec3;
    fn series(&self, u0: f64, v0: f64, deg: usize) -> [Taylor2; 3];
}

impl<P: Parametrization> SurfaceMap for P {
    fn position(&self, u: f64, v: f64) -> Vec3 {
        let [x, y, z] = self.eval(u, v);
        Vec3::new(x, y, z)
    }

    fn series(&self, u0: f64, v0: f64, deg: usize) -> [Taylor2; 3] {
        self.eval(Taylor2::var_u(u0, deg), Taylor2::var_v(v0, deg))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Domain {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Domain {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64) -> Self {
        Self { u_min, u_max, v_min, v_max }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    /// True when the disc of radius `margin` (parameter units) around the point stays inside.
    pub fn contains_with_margin(&self, u: f64, v: f64, margin_u: f64, margin_v: f64) -> bool {
        u - margin_u >= self.u_min
            && u + margin_u <= self.u_max
            && v - margin_v >= self.v_min
            && v + margin_v <= self.v_max
    }

    /// Uniform `n1 × n2` grid of points, row-major in `v` then `u`.
    pub fn grid(&self, n1: usize, n2: usize) -> Vec<(f64, f64)> {
        let lin = |a: f64, b: f64, n: usize, k: usize| {
            if n <= 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        };
        let mut pts = Vec::with_capacity(n1 * n2);
        for j in 0..n2 {
            for i in 0..n1 {
                pts.push((lin(self.u_min, self.u_max, n1, i), lin(self.v_min, self.v_max, n2, j)));
            }
        }
        pts
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JetSource {
    Analytic,
    /// Central differences of the position with base step `h` (scaled per
    /// derivative order) and optional Richardson extrapolation.
    Numeric { h: f64, richardson: bool },
}

#[derive(Clone, Debug)]
pub struct SurfacePatch {
    map: Arc<dyn SurfaceMap>,
    pub domain: Domain,
    pub jet_source: JetSource,
    pub max_order: usize,
    /// Characteristic parameter length used to scale difference steps.
    pub scale: f64,
}

/// Partial derivatives of the position at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub v: f64,
    pub order: usize,
    derivs: Vec<Vec3>,
}

impl Jet {
    pub fn d(&self, i: usize, j: usize) -> Vec3 {
        if i + j > self.order {
            Vec3::zeros()
        } else {
            self.derivs[crate::series::tri_index(i, j)]
        }
    }

    pub fn position(&self) -> Vec3 {
        self.d(0, 0)
    }

    /// Taylor expansion of the position around the jet point.
    pub fn series(&self) -> [Taylor2; 3] {
        let comp = |k: usize| {
            Taylor2::from_coeffs(self.order, |i, j| self.d(i, j)[k] / (factorial(i) * factorial(j)))
        };
        [comp(0), comp(1), comp(2)]
    }

    fn from_series(u: f64, v: f64, s: &[Taylor2; 3]) -> Self {
        let order = s[0].deg();
        let mut derivs = vec![Vec3::zeros(); crate::series::tri_len(order)];
        for n in 0..=order {
            for j in 0..=n {
                let i = n - j;
                derivs[crate::series::tri_index(i, j)] =
                    Vec3::new(s[0].partial(i, j), s[1].partial(i, j), s[2].partial(i, j));
            }
        }
        Jet { u, v, order, derivs }
    }
}

const STENCILS: [&[(i32, f64)]; 5] = [
    &[(0, 1.0)],
    &[(-1, -0.5), (1, 0.5)],
    &[(-1, 1.0), (0, -2.0), (1, 1.0)],
    &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
];

/// Step multipliers per derivative order balancing truncation and roundoff.
const ORDER_STEP: [f64; 5] = [1.0, 1.0, 10.0, 50.0, 100.0];

impl SurfacePatch {
    pub fn new(map: Arc<dyn SurfaceMap>, domain: Domain) -> Self {
        Self { map, domain, jet_source: JetSource::Analytic, max_order: 6, scale: 1.0 }
    }

    pub fn from_param<P: Parametrization + 'static>(p: P, domain: Domain) -> Self {
        Self::new(Arc::new(p), domain)
    }

    /// Same surface with jets from central differences of positions.
    pub fn with_numeric_jets(&self, h: f64, richardson: bool) -> Self {
        Self { jet_source: JetSource::Numeric { h, richardson }, max_order: 4, ..self.clone() }
    }

    pub fn with_domain(&self, domain: Domain) -> Self {
        Self { domain, ..self.clone() }
    }

    pub fn map(&self) -> &Arc<dyn SurfaceMap> {
        &self.map
    }

    pub fn position(&self, u: f64, v: f64) -> Vec3 {
        self.map.position(u, v)
    }

    pub fn eval_jet(&self, u: f64, v: f64, order: usize) -> Result<Jet> {
        if !self.domain.contains(u, v) {
            return Err(Error::OutOfDomain { u, v });
        }
        self.jet_unchecked(u, v, order)
    }

    /// Jet without the domain check; used by stencils that reach past the edge.
    pub fn jet_unchecked(&self, u: f64, v: f64, order: usize) -> Result<Jet> {
        if order > self.max_order {
            return Err(Error::OrderUnavailable { requested: order, max: self.max_order });
        }
        match self.jet_source {
            JetSource::Analytic => Ok(Jet::from_series(u, v, &self.map.series(u, v, order))),
            JetSource::Numeric { h, richardson } => Ok(self.numeric_jet(u, v, order, h, richardson)),
        }
    }

    fn numeric_jet(&self, u: f64, v: f64, order: usize, h: f64, richardson: bool) -> Jet {
        let mut derivs = vec![Vec3::zeros(); crate::series::tri_len(order)];
        for n in 0..=order {
            let hn = h * self.scale * ORDER_STEP[n];
            for j in 0..=n {
                let i = n - j;
                let coarse = self.difference(u, v, i, j, hn);
                derivs[crate::series::tri_index(i, j)] = if richardson && n > 0 {
                    let fine = self.difference(u, v, i, j, 0.5 * hn);
                    (fine * 4.0 - coarse) / 3.0
                } else {
                    coarse
                };
            }
        }
        Jet { u, v, order, derivs }
    }

    fn difference(&self, u: f64, v: f64, i: usize, j: usize, h: f64) -> Vec3 {
        let mut acc = Vec3::zeros();
        for &(a, wa) in STENCILS[i] {
            for &(b, wb) in STENCILS[j] {
                acc += self.map.position(u + a as f64 * h, v + b as f64 * h) * (wa * wb);
            }
        }
        acc / h.powi((i + j) as i32)
    }
}

/// Classical curvature package at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalData {
    pub k1: f64,
    pub k2: f64,
    pub h: f64,
    pub mu: f64,
    /// Principal directions in parameter coordinates, unit ambient length.
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub x1_amb: Vec3,
    pub x2_amb: Vec3,
    pub normal: Vec3,
    /// First fundamental form (E, F, G).
    pub metric: [f64; 3],
}

impl PrincipalData {
    /// Metric inner product of two parameter-plane vectors.
    pub fn dot(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let [e, f, g] = self.metric;
        e * a[0] * b[0] + f * (a[0] * b[1] + a[1] * b[0]) + g * a[1] * b[1]
    }
}

pub const DEFAULT_TOL_UMB: f64 = 1e-8;

/// Principal data with X1 aligned to +u (falling back to +v).
pub fn principal_data(jet: &Jet) -> Result<PrincipalData> {
    principal_data_aligned(jet, None, DEFAULT_TOL_UMB)
}

/// Principal data with X1 aligned to `reference` (a parameter-plane vector)
/// when given. X2 completes the right-handed frame (X1, X2, n), n = r_u × r_v.
pub fn principal_data_aligned(jet: &Jet, reference: Option<[f64; 2]>, tol_umb: f64) -> Result<PrincipalData> {
    let (ru, rv) = (jet.d(1, 0), jet.d(0, 1));
    let (ruu, ruv, rvv) = (jet.d(2, 0), jet.d(1, 1), jet.d(0, 2));
    let (e, f, g) = (ru.dot(&ru), ru.dot(&rv), rv.dot(&rv));
    let det = e * g - f * f;
    let nraw = ru.cross(&rv);
    if !(det > 1e-14 * e * g) || nraw.norm() == 0.0 {
        return Err(Error::DegenerateMetric);
    }
    let n = nraw / nraw.norm();
    let (l, m, nn) = (ruu.dot(&n), ruv.dot(&n), rvv.dot(&n));
    // Shape operator W = I^{-1} II acting on parameter vectors.
    let w11 = (g * l - f * m) / det;
    let w12 = (g * m - f * nn) / det;
    let w21 = (e * m - f * l) / det;
    let w22 = (e * nn - f * m) / det;
    let h = 0.5 * (w11 + w22);
    let disc = (0.25 * (w11 - w22) * (w11 - w22) + w12 * w21).max(0.0);
    let mu = disc.sqrt();
    let (k1, k2) = (h + mu, h - mu);
    if 2.0 * mu < tol_umb * k1.abs().max(k2.abs()).max(1.0) {
        return Err(Error::UmbilicPoint { gap: 2.0 * mu });
    }
    let metric = [e, f, g];
    let amb = |x: [f64; 2]| ru * x[0] + rv * x[1];
    let c1 = [w12, k1 - w11];
    let c2 = [k1 - w22, w21];
    let mut x1 = if amb(c1).norm() >= amb(c2).norm() { c1 } else { c2 };
    let len = amb(x1).norm();
    x1 = [x1[0] / len, x1[1] / len];
    let flip = match reference {
        Some(r) => e * x1[0] * r[0] + f * (x1[0] * r[1] + x1[1] * r[0]) + g * x1[1] * r[1] < 0.0,
        None => {
            if (x1[0] * ru.norm()).abs() > 1e-9 {
                x1[0] < 0.0
            } else {
                x1[1] < 0.0
            }
        }
    };
    if flip {
        x1 = [-x1[0], -x1[1]];
    }
    let x1_amb = amb(x1);
    let x2_amb = n.cross(&x1_amb);
    let (bu, bv) = (x2_amb.dot(&ru), x2_amb.dot(&rv));
    let x2 = [(g * bu - f * bv) / det, (e * bv - f * bu) / det];
    Ok(PrincipalData { k1, k2, h, mu, x1, x2, x1_amb, x2_amb, normal: n, metric })
}

/// One primitive conformal map of R³.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub enum MobiusPrimitive {
    Rotation(Matrix3<f64>),
    Translation(Vec3),
    Dilation(f64),
    /// x ↦ x/|x|².
    Inversion,
    /// Inversion, translation by `b`, inversion; evaluated in closed form so it
    /// is regular at the origin.
    SpecialConformal(Vec3),
}

/// Composition of primitives, applied first to last.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct MobiusMap {
    pub ops: Vec<MobiusPrimitive>,
}

fn dot3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

impl MobiusPrimitive {
    pub fn apply<T: Real>(&self, p: [T; 3]) -> [T; 3] {
        match self {
            MobiusPrimitive::Rotation(r) => {
                let row = |k: usize| p[0].clone() * r[(k, 0)] + p[1].clone() * r[(k, 1)] + p[2].clone() * r[(k, 2)];
                [row(0), row(1), row(2)]
            }
            MobiusPrimitive::Translation(t) => [p[0].clone() + t[0], p[1].clone() + t[1], p[2].clone() + t[2]],
            MobiusPrimitive::Dilation(s) => [p[0].clone() * *s, p[1].clone() * *s, p[2].clone() * *s],
            MobiusPrimitive::Inversion => {
                let inv = dot3(&p, &p).recip();
                [p[0].clone() * inv.clone(), p[1].clone() * inv.clone(), p[2].clone() * inv]
            }
            MobiusPrimitive::SpecialConformal(b) => {
                let r2 = dot3(&p, &p);
                let bx = p[0].clone() * b[0] + p[1].clone() * b[1] + p[2].clone() * b[2];
                let den = (bx * 2.0 + r2.clone() * b.norm_squared() + 1.0).recip();
                let comp = |k: usize| (p[k].clone() + r2.clone() * b[k]) * den.clone();
                [comp(0), comp(1), comp(2)]
            }
        }
    }

    pub fn inverse(&self) -> MobiusPrimitive {
        match self {
            MobiusPrimitive::Rotation(r) => MobiusPrimitive::Rotation(r.transpose()),
            MobiusPrimitive::Translation(t) => MobiusPrimitive::Translation(-t),
            MobiusPrimitive::Dilation(s) => MobiusPrimitive::Dilation(1.0 / s),
            MobiusPrimitive::Inversion => MobiusPrimitive::Inversion,
            MobiusPrimitive::SpecialConformal(b) => MobiusPrimitive::SpecialConformal(-b),
        }
    }
}

impl MobiusMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn then(mut self, op: MobiusPrimitive) -> Self {
        self.ops.push(op);
        self
    }

    pub fn rotation_axis_angle(axis: Vec3, angle: f64) -> MobiusPrimitive {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        MobiusPrimitive::Rotation(*r.matrix())
    }

    pub fn apply<T: Real>(&self, mut p: [T; 3]) -> [T; 3] {
        for op in &self.ops {
            p = op.apply(p);
        }
        p
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        let [x, y, z] = self.apply([p[0], p[1], p[2]]);
        Vec3::new(x, y, z)
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap { ops: self.ops.iter().rev().map(|o| o.inverse()).collect() }
    }

    /// Smallest distance from an inversion center met by the sample points.
    fn min_center_distance(&self, p: Vec3) -> f64 {
        let mut q = [p[0], p[1], p[2]];
        let mut best = f64::INFINITY;
        for op in &self.ops {
            if matches!(op, MobiusPrimitive::Inversion) {
                best = best.min(dot3(&q, &q).sqrt());
            }
            if let MobiusPrimitive::SpecialConformal(b) = op {
                let v = Vec3::new(q[0], q[1], q[2]);
                let den = 1.0 + 2.0 * b.dot(&v) + b.norm_squared() * v.norm_squared();
                best = best.min(den.abs().sqrt() / b.norm().max(1e-300));
            }
            q = op.apply(q);
        }
        best
    }
}

#[derive(Debug)]
struct MobiusSurface {
    base: Arc<dyn SurfaceMap>,
    map: MobiusMap,
}

impl SurfaceMap for MobiusSurface {
    fn position(&self, u: f64, v: f64) -> Vec3 {
        self.map.apply_point(self.base.position(u, v))
    }

    fn series(&self, u0: f64, v0: f64, deg: usize) -> [Taylor2; 3] {
        self.map.apply(self.base.series(u0, v0, deg))
    }
}

/// Compose the surface with an ambient Möbius map. The image of the domain
/// (sampled on a 33×33 grid) must stay away from inversion centers.
pub fn mobius_transform(surface: &SurfacePatch, map: &MobiusMap) -> Result<SurfacePatch> {
    let d = surface.domain;
    let extent = d.grid(2, 2).iter().map(|&(u, v)| surface.position(u, v).norm()).fold(1.0, f64::max);
    for (u, v) in d.grid(33, 33) {
        if map.min_center_distance(surface.position(u, v)) < 1e-6 * extent {
            return Err(Error::InversionCenterOnSurface);
        }
    }
    let mapped = MobiusSurface { base: surface.map.clone(), map: map.clone() };
    Ok(SurfacePatch { map: Arc::new(mapped), ..surface.clone() })
}
