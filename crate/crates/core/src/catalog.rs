//! Built-in surfaces with analytic jets, closed-form oracles for helcats and
//! the key-value surface specification format.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::{fourth_order_coeffs, ThetaDerivatives};
use crate::series::Real;
use crate::surface::{Domain, Parametrization, SurfacePatch};

/// Helicoid–catenoid family member with parameter `alpha_h`.
#[derive(Clone, Copy, Debug)]
pub struct Helcat {
    pub alpha_h: f64,
}

impl Parametrization for Helcat {
    fn eval<T: Real>(&self, s: T, t: T) -> [T; 3] {
        let (sa, ca) = self.alpha_h.sin_cos();
        let (sh, ch) = (s.sinh(), s.cosh());
        let (st, ct) = (t.sin(), t.cos());
        [
            sh.clone() * st.clone() * ca + ch.clone() * ct.clone() * sa,
            -(sh * ct) * ca + ch * st * sa,
            s * sa + t * ca,
        ]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Torus {
    pub big_r: f64,
    pub r: f64,
}

impl Parametrization for Torus {
    fn eval<T: Real>(&self, u: T, v: T) -> [T; 3] {
        let w = v.cos() * self.r + self.big_r;
        [w.clone() * u.cos(), w * u.sin(), v.sin() * self.r]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum CenterCurve {
    Circle { radius: f64 },
    /// (a cos φ, a sin φ, b φ).
    Helix { radius: f64, pitch: f64 },
}

impl CenterCurve {
    pub fn curvature(&self) -> f64 {
        match *self {
            CenterCurve::Circle { radius } => 1.0 / radius,
            CenterCurve::Helix { radius, pitch } => radius / (radius * radius + pitch * pitch),
        }
    }
}

/// Constant-radius tube around a circle or helix; `u` runs along the curve,
/// `v` around the characteristic circle.
#[derive(Clone, Copy, Debug)]
pub struct Tube {
    pub curve: CenterCurve,
    pub radius: f64,
}

impl Parametrization for Tube {
    fn eval<T: Real>(&self, u: T, v: T) -> [T; 3] {
        let (a, b) = match self.curve {
            CenterCurve::Circle { radius } => (radius, 0.0),
            CenterCurve::Helix { radius, pitch } => (radius, pitch),
        };
        let w = (a * a + b * b).sqrt();
        let (su, cu) = (u.sin(), u.cos());
        let (sv, cv) = (v.sin(), v.cos());
        let rho = self.radius;
        // Frenet normal N = -(cos u, sin u, 0), binormal B = (b sin u, -b cos u, a)/w.
        let nb = |n_k: T, b_k: T| n_k * cv.clone() * rho + b_k * sv.clone() * rho;
        [
            cu.clone() * a + nb(-cu.clone(), su.clone() * (b / w)),
            su.clone() * a + nb(-su, -cu * (b / w)),
            u.clone() * b + sv.clone() * (rho * a / w),
        ]
    }
}

/// Graph z = Σ c_ij u^i v^j over the (u, v) plane.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Graph {
    pub terms: Vec<(usize, usize, f64)>,
}

impl Parametrization for Graph {
    fn eval<T: Real>(&self, u: T, v: T) -> [T; 3] {
        let mut z = u.lift(0.0);
        for &(i, j, c) in &self.terms {
            z = z + u.powi(i as u32) * v.powi(j as u32) * c;
        }
        [u, v, z]
    }
}

/// The seven coefficients of the canonical fourth-order graph
/// z = ½(x²−y²) + (θ₁x³+θ₂y³)/6 + (a x⁴ + 4b x³y + 6Ψ x²y² + 4c xy³ + d y⁴)/24.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct CanonicalCoeffs {
    pub theta1: f64,
    pub theta2: f64,
    pub psi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CanonicalCoeffs {
    pub fn new(theta1: f64, theta2: f64, psi: f64, a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { theta1, theta2, psi, a, b, c, d }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.theta1, self.theta2, self.psi, self.a, self.b, self.c, self.d]
    }

    pub fn graph(&self) -> Graph {
        let t = |i, j, c: f64| (i, j, c);
        Graph {
            terms: vec![
                t(2, 0, 0.5),
                t(0, 2, -0.5),
                t(3, 0, self.theta1 / 6.0),
                t(0, 3, self.theta2 / 6.0),
                t(4, 0, self.a / 24.0),
                t(3, 1, self.b / 6.0),
                t(2, 2, self.psi / 4.0),
                t(1, 3, self.c / 6.0),
                t(0, 4, self.d / 24.0),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Sphere {
    pub radius: f64,
}

impl Parametrization for Sphere {
    fn eval<T: Real>(&self, u: T, v: T) -> [T; 3] {
        let cv = v.cos() * self.radius;
        [cv.clone() * u.cos(), cv * u.sin(), v.sin() * self.radius]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Ellipsoid {
    pub axes: [f64; 3],
}

impl Parametrization for Ellipsoid {
    fn eval<T: Real>(&self, u: T, v: T) -> [T; 3] {
        let cv = v.cos();
        [cv.clone() * u.cos() * self.axes[0], cv * u.sin() * self.axes[1], v.sin() * self.axes[2]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurfaceParams {
    Helcat { alpha_h: f64 },
    Torus { big_r: f64, r: f64 },
    Tube { curve: CenterCurve, radius: f64 },
    Graph { terms: Vec<(usize, usize, f64)> },
    Canonical(CanonicalCoeffs),
    Sphere { radius: f64 },
    Ellipsoid { axes: [f64; 3] },
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub params: SurfaceParams,
    pub patch: SurfacePatch,
    pub dupin_everywhere: bool,
    pub canal_everywhere: bool,
    pub oracle: Option<HelcatOracle>,
}

pub fn make_helcat(alpha_h: f64) -> CatalogEntry {
    let patch = SurfacePatch::from_param(Helcat { alpha_h }, Domain::new(-3.0, 3.0, -4.0, 10.0));
    CatalogEntry {
        name: format!("helcat({alpha_h})"),
        params: SurfaceParams::Helcat { alpha_h },
        patch,
        dupin_everywhere: false,
        canal_everywhere: (alpha_h - PI / 2.0).abs() < 1e-15,
        oracle: Some(HelcatOracle { alpha_h }),
    }
}

pub fn make_torus(big_r: f64, r: f64) -> Result<CatalogEntry> {
    if !(big_r > r && r > 0.0) {
        return Err(Error::InvalidSpec(format!("torus needs R > r > 0, got R={big_r}, r={r}")));
    }
    Ok(CatalogEntry {
        name: format!("torus({big_r},{r})"),
        params: SurfaceParams::Torus { big_r, r },
        patch: SurfacePatch::from_param(Torus { big_r, r }, Domain::new(-7.0, 14.0, -7.0, 14.0)),
        dupin_everywhere: true,
        canal_everywhere: true,
        oracle: None,
    })
}

pub fn make_tube(curve: CenterCurve, radius: f64) -> Result<CatalogEntry> {
    let limit = 1.0 / curve.curvature();
    if !(radius > 0.0 && radius < limit) {
        return Err(Error::SelfIntersectingTube { radius, limit });
    }
    let dupin = matches!(curve, CenterCurve::Circle { .. });
    Ok(CatalogEntry {
        name: format!("tube({curve:?},{radius})"),
        params: SurfaceParams::Tube { curve, radius },
        patch: SurfacePatch::from_param(Tube { curve, radius }, Domain::new(-7.0, 14.0, -7.0, 14.0)),
        dupin_everywhere: dupin,
        canal_everywhere: true,
        oracle: None,
    })
}

pub fn make_graph(terms: Vec<(usize, usize, f64)>) -> CatalogEntry {
    let g = Graph { terms: terms.clone() };
    CatalogEntry {
        name: "graph".into(),
        params: SurfaceParams::Graph { terms },
        patch: SurfacePatch::from_param(g, Domain::new(-1.0, 1.0, -1.0, 1.0)),
        dupin_everywhere: false,
        canal_everywhere: false,
        oracle: None,
    }
}

pub fn make_canonical(coeffs: CanonicalCoeffs) -> CatalogEntry {
    CatalogEntry {
        name: "canonical".into(),
        params: SurfaceParams::Canonical(coeffs),
        patch: SurfacePatch::from_param(coeffs.graph(), Domain::new(-1.0, 1.0, -1.0, 1.0)),
        dupin_everywhere: false,
        canal_everywhere: false,
        oracle: None,
    }
}

pub fn make_sphere(radius: f64) -> CatalogEntry {
    CatalogEntry {
        name: format!("sphere({radius})"),
        params: SurfaceParams::Sphere { radius },
        patch: SurfacePatch::from_param(Sphere { radius }, Domain::new(-7.0, 14.0, -1.4, 1.4)),
        dupin_everywhere: false,
        canal_everywhere: false,
        oracle: None,
    }
}

pub fn make_ellipsoid(axes: [f64; 3]) -> CatalogEntry {
    CatalogEntry {
        name: format!("ellipsoid({},{},{})", axes[0], axes[1], axes[2]),
        params: SurfaceParams::Ellipsoid { axes },
        patch: SurfacePatch::from_param(Ellipsoid { axes }, Domain::new(-7.0, 14.0, -1.4, 1.4)),
        dupin_everywhere: false,
        canal_everywhere: false,
        oracle: None,
    }
}

/// Closed-form invariants of helcats.
///
/// `true_*` values are the exact invariants in the library frame: X1 along
/// (cos α, −(1+sin α)) in (s, t), flipped to +t at the catenoid where that
/// vector has no s-component, and X2 = n × X1. `displayed_*` values are the
/// traditional closed forms as usually quoted, with positive θ's and
/// Ψ = sin α (3 cosh² s − 2); those are what the Ψ_C table is built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HelcatOracle {
    pub alpha_h: f64,
}

impl HelcatOracle {
    fn sc(&self) -> (f64, f64) {
        self.alpha_h.sin_cos()
    }

    /// +1 in the generic case, −1 at the catenoid where the +u fallback flips X1.
    fn frame_sign(&self) -> f64 {
        let (_, c) = self.sc();
        if c.abs() * 1.0 > 1e-9 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn kappa(&self) -> f64 {
        let (s, c) = self.sc();
        c / (1.0 + s)
    }

    pub fn true_thetas(&self, s: f64) -> (f64, f64) {
        let (sa, _) = self.sc();
        let e = self.frame_sign();
        (-e * (2.0 * (1.0 - sa)).sqrt() * s.sinh(), e * (2.0 * (1.0 + sa)).sqrt() * s.sinh())
    }

    pub fn displayed_thetas(&self, s: f64) -> (f64, f64) {
        let (sa, _) = self.sc();
        ((2.0 * (1.0 - sa)).sqrt() * s.sinh(), (2.0 * (1.0 + sa)).sqrt() * s.sinh())
    }

    /// ξ₁, ξ₂ in (s, t) coordinates, library frame.
    pub fn true_xi(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let (sa, ca) = self.sc();
        let k = (2.0 * (1.0 + sa)).sqrt();
        let f = self.frame_sign() * s.cosh() / k;
        ([f * ca, -f * (1.0 + sa)], [f * (1.0 + sa), f * ca])
    }

    pub fn displayed_xi(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let (sa, ca) = self.sc();
        let f = 1.0 / ((2.0 * (1.0 + sa)).sqrt() * s.cosh());
        ([f * ca, -f * (1.0 + sa)], [f * (1.0 + sa), f * ca])
    }

    pub fn true_theta_derivatives(&self, s: f64) -> ThetaDerivatives {
        let (sa, ca) = self.sc();
        let ch2 = s.cosh().powi(2);
        ThetaDerivatives {
            xi1_theta1: -(1.0 - sa) * ch2,
            xi2_theta1: -ca * ch2,
            xi1_theta2: ca * ch2,
            xi2_theta2: (1.0 + sa) * ch2,
        }
    }

    /// ξ-derivatives of the displayed θ's along the displayed ξ's, taken with
    /// the orientation that makes the displayed θ's a consistent frame.
    pub fn displayed_theta_derivatives(&self) -> ThetaDerivatives {
        let (sa, ca) = self.sc();
        ThetaDerivatives {
            xi1_theta1: -(1.0 - sa),
            xi2_theta1: -ca,
            xi1_theta2: -ca,
            xi2_theta2: -(1.0 + sa),
        }
    }

    pub fn true_psi(&self, s: f64) -> f64 {
        let (sa, _) = self.sc();
        sa * (s.cosh().powi(2) - 2.0)
    }

    pub fn displayed_psi(&self, s: f64) -> f64 {
        let (sa, _) = self.sc();
        sa * (3.0 * s.cosh().powi(2) - 2.0)
    }

    /// (a, b, c, d) from the exact invariants.
    pub fn true_abcd(&self, s: f64) -> [f64; 4] {
        let (t1, t2) = self.true_thetas(s);
        fourth_order_coeffs(t1, t2, &self.true_theta_derivatives(s))
    }

    pub fn displayed_abcd(&self, s: f64) -> [f64; 4] {
        let (t1, t2) = self.displayed_thetas(s);
        fourth_order_coeffs(t1, t2, &self.displayed_theta_derivatives())
    }
}

/// Parsed `key = value` surface specification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceSpec {
    pub params: SurfaceParams,
    pub domain: Option<Domain>,
}

impl SurfaceSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("line {}: expected key = value", lineno + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::InvalidSpec(format!("missing key `{k}`")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse::<f64>().map_err(|_| Error::InvalidSpec(format!("key `{k}` is not a number")))
        };
        let kind = get("kind")?.to_lowercase();
        let params = match kind.as_str() {
            "helcat" => SurfaceParams::Helcat { alpha_h: parse_angle(get("alpha_h")?)? },
            "torus" => SurfaceParams::Torus { big_r: num("R")?, r: num("r")? },
            "tube" => SurfaceParams::Tube { curve: parse_curve(get("curve")?)?, radius: num("radius")? },
            "sphere" => SurfaceParams::Sphere { radius: num("radius")? },
            "ellipsoid" => {
                let a = parse_list(get("coeffs")?)?;
                if a.len() != 3 {
                    return Err(Error::InvalidSpec("ellipsoid coeffs needs three semi-axes".into()));
                }
                SurfaceParams::Ellipsoid { axes: [a[0], a[1], a[2]] }
            }
            "graph" => SurfaceParams::Graph { terms: parse_terms(get("coeffs")?)? },
            "canonical" => {
                let c = parse_list(get("coeffs")?)?;
                if c.len() != 7 {
                    return Err(Error::InvalidSpec("canonical coeffs needs 7 numbers".into()));
                }
                SurfaceParams::Canonical(CanonicalCoeffs::new(c[0], c[1], c[2], c[3], c[4], c[5], c[6]))
            }
            other => return Err(Error::InvalidSpec(format!("unknown kind `{other}`"))),
        };
        let domain = match kv.get("domain") {
            Some(d) => Some(parse_range(d)?),
            None => None,
        };
        Ok(Self { params, domain })
    }

    pub fn build(&self) -> Result<CatalogEntry> {
        let mut e = match &self.params {
            SurfaceParams::Helcat { alpha_h } => make_helcat(*alpha_h),
            SurfaceParams::Torus { big_r, r } => make_torus(*big_r, *r)?,
            SurfaceParams::Tube { curve, radius } => make_tube(*curve, *radius)?,
            SurfaceParams::Graph { terms } => make_graph(terms.clone()),
            SurfaceParams::Canonical(c) => make_canonical(*c),
            SurfaceParams::Sphere { radius } => make_sphere(*radius),
            SurfaceParams::Ellipsoid { axes } => make_ellipsoid(*axes),
        };
        if let Some(d) = self.domain {
            e.patch = e.patch.with_domain(d);
        }
        Ok(e)
    }
}

/// Accepts plain numbers and `pi/x`, `pi*x`, `pi` forms.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_lowercase().replace(' ', "");
    let bad = || Error::InvalidSpec(format!("bad angle `{s}`"));
    if let Some(rest) = t.strip_prefix("pi") {
        if rest.is_empty() {
            return Ok(PI);
        }
        let (op, val) = rest.split_at(1);
        let x: f64 = val.parse().map_err(|_| bad())?;
        return match op {
            "/" => Ok(PI / x),
            "*" => Ok(PI * x),
            _ => Err(bad()),
        };
    }
    t.parse().map_err(|_| bad())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split([',', ' '])
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().map_err(|_| Error::InvalidSpec(format!("bad number `{x}`"))))
        .collect()
}

/// `i:j:c` terms separated by commas.
fn parse_terms(s: &str) -> Result<Vec<(usize, usize, f64)>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|term| {
            let parts: Vec<&str> = term.split(':').map(str::trim).collect();
            let bad = || Error::InvalidSpec(format!("bad graph term `{term}` (want i:j:c)"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok((
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
                parts[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// `circle R` or `helix R b`.
fn parse_curve(s: &str) -> Result<CenterCurve> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| Error::InvalidSpec(format!("bad curve `{s}`")));
    match parts.as_slice() {
        ["circle", r] => Ok(CenterCurve::Circle { radius: num(r)? }),
        ["helix", r, b] => Ok(CenterCurve::Helix { radius: num(r)?, pitch: num(b)? }),
        _ => Err(Error::InvalidSpec(format!("bad curve `{s}` (want `circle R` or `helix R b`)"))),
    }
}

/// `u0:u1,v0:v1`.
pub fn parse_range(s: &str) -> Result<Domain> {
    let bad = || Error::InvalidSpec(format!("bad range `{s}` (want u0:u1,v0:v1)"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let pair = |x: &str| -> Result<(f64, f64)> {
        let (l, r) = x.split_once(':').ok_or_else(bad)?;
        Ok((parse_angle(l)?, parse_angle(r)?))
    };
    let ((u0, u1), (v0, v1)) = (pair(a)?, pair(b)?);
    Ok(Domain::new(u0, u1, v0, v1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::principal_data;
    use approx::assert_relative_eq;

    #[test]
    fn helcat_is_minimal() {
        for alpha in [0.0, PI / 6.0, PI / 4.0, PI / 2.0] {
            let e = make_helcat(alpha);
            for (s, t) in [(0.3, 0.1), (-1.2, 2.0), (1.9, 5.0)] {
                let pd = principal_data(&e.patch.eval_jet(s, t, 2).unwrap()).unwrap();
                assert!(pd.h.abs() < 1e-8);
                assert_relative_eq!(pd.mu, 1.0 / s.cosh().powi(2), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn torus_curvatures_at_outer_equator() {
        let e = make_torus(2.0, 1.0).unwrap();
        let pd = principal_data(&e.patch.eval_jet(0.5, 0.0, 2).unwrap()).unwrap();
        assert_relative_eq!(pd.k1, -1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(pd.k2, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn tube_lies_at_constant_distance_from_helix() {
        let t = Tube { curve: CenterCurve::Helix { radius: 2.0, pitch: 0.5 }, radius: 0.4 };
        for (u, v) in [(0.0, 0.0), (1.0, 2.0), (-2.0, 4.0)] {
            let p = crate::surface::SurfaceMap::position(&t, u, v);
            let c = nalgebra::Vector3::new(2.0 * f64::cos(u), 2.0 * f64::sin(u), 0.5 * u);
            assert_relative_eq!((p - c).norm(), 0.4, epsilon = 1e-14);
        }
    }

    #[test]
    fn tube_radius_limited_by_curvature() {
        assert!(matches!(
            make_tube(CenterCurve::Circle { radius: 2.0 }, 2.5),
            Err(Error::SelfIntersectingTube { .. })
        ));
    }

    #[test]
    fn oracle_coefficients_at_reference_point() {
        let o = HelcatOracle { alpha_h: PI / 4.0 };
        let abcd = o.true_abcd(1.0);
        let expect = [3.11162, 0.26948, -0.26948, -3.65057];
        for k in 0..4 {
            assert_relative_eq!(abcd[k], expect[k], epsilon = 1e-5);
        }
        assert_relative_eq!(o.true_psi(1.0), 0.26948, epsilon = 1e-5);
    }

    #[test]
    fn parses_specs() {
        let s = SurfaceSpec::parse("kind = helcat\nalpha_h = pi/4 # comment\n").unwrap();
        assert_eq!(s.params, SurfaceParams::Helcat { alpha_h: PI / 4.0 });
        let s = SurfaceSpec::parse("kind = tube\ncurve = helix 2 0.5\nradius = 0.4").unwrap();
        assert!(matches!(s.params, SurfaceParams::Tube { .. }));
        let s = SurfaceSpec::parse("kind = canonical\ncoeffs = 1, 2, 0, 3.5, 0.25, -0.5, -3.25").unwrap();
        assert_eq!(s.params, SurfaceParams::Canonical(CanonicalCoeffs::new(1.0, 2.0, 0.0, 3.5, 0.25, -0.5, -3.25)));
        let s = SurfaceSpec::parse("kind = graph\ncoeffs = 2:0:0.5, 0:2:0.2\ndomain = -0.5:0.5,-0.5:0.5").unwrap();
        assert_eq!(s.domain, Some(Domain::new(-0.5, 0.5, -0.5, 0.5)));
        assert!(SurfaceSpec::parse("kind = blob").is_err());
        assert!(SurfaceSpec::parse("kind = torus\nR = 2").is_err());
    }
}
