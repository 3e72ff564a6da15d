//! Osculating Dupin cyclides: the distinguished direction, the cyclide
//! invariant Ψ_C, canonical profiles along the direction, the Möbius
//! standard position and a numerical contact-order check.

use serde::Serialize;

use crate::catalog::HelcatOracle;
use crate::error::{Error, Result};
use crate::invariants::{classify, fourth_order_coeffs, Analyzer, Classification, InvariantSample};
use crate::series::{invert_map, Taylor2};
use crate::surface::{MobiusMap, MobiusPrimitive, PrincipalData, SurfacePatch, Vec3};

/// Sign convention for the direction parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum DupinSign {
    /// t = ∛(−θ₁/θ₂): the cubic term of the surface profile vanishes.
    #[default]
    Cubic,
    /// t = ∛(θ₁/θ₂) as written in the theorem statement.
    Literal,
}

impl DupinSign {
    pub fn t_from_ratio(self, ratio: f64) -> f64 {
        match self {
            DupinSign::Cubic => (-ratio).cbrt(),
            DupinSign::Literal => ratio.cbrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DupinDirection {
    pub t: f64,
    /// arctan|t| in [0, π/2).
    pub alpha: f64,
    /// Unit direction in parameter coordinates (unoriented).
    pub param: [f64; 2],
    pub ambient: [f64; 3],
    /// The angle is measured from X₂ because θ₂ vanishes.
    pub from_x2: bool,
    /// t came from a caller-supplied ratio at a Dupin point.
    pub limit_derived: bool,
}

/// Direction of tangency for the osculating cyclide.
pub fn dupin_direction(
    theta1: f64,
    theta2: f64,
    pd: &PrincipalData,
    sign: DupinSign,
    tol_canal: f64,
    limit_ratio: Option<f64>,
) -> Result<DupinDirection> {
    let (t, from_x2, limit_derived) = match classify(theta1, theta2, tol_canal) {
        Classification::Dupin => match limit_ratio {
            Some(k) => (sign.t_from_ratio(k), false, true),
            None => return Err(Error::DupinPoint),
        },
        Classification::CanalTheta2 => (sign.t_from_ratio(theta2 / theta1), true, false),
        _ => (sign.t_from_ratio(theta1 / theta2), false, false),
    };
    let alpha = t.abs().atan();
    let (ca, sa) = (alpha.cos(), alpha.sin() * t.signum());
    let (e1, e2, a1, a2) = if from_x2 {
        (pd.x2, pd.x1, pd.x2_amb, pd.x1_amb)
    } else {
        (pd.x1, pd.x2, pd.x1_amb, pd.x2_amb)
    };
    let param = [ca * e1[0] + sa * e2[0], ca * e1[1] + sa * e2[1]];
    let amb = a1 * ca + a2 * sa;
    Ok(DupinDirection { t, alpha, param, ambient: [amb[0], amb[1], amb[2]], from_x2, limit_derived })
}

/// Ψ_C = (6/t²)[(a + 4bt + 6Ψt² + 4ct³ + dt⁴)/24 − (1 − t⁴)/8].
pub fn osculating_psi(t: f64, psi: f64, abcd: [f64; 4]) -> f64 {
    let [a, b, c, d] = abcd;
    let quartic = (a + 4.0 * b * t + 6.0 * psi * t * t + 4.0 * c * t.powi(3) + d * t.powi(4)) / 24.0;
    6.0 / (t * t) * (quartic - (1.0 - t.powi(4)) / 8.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CyclideContact {
    pub u: f64,
    pub v: f64,
    pub position: [f64; 3],
    pub t: f64,
    pub alpha: f64,
    pub psi_c: f64,
    pub contact_order: u32,
    pub direction: DupinDirection,
}

/// Osculating cyclide from an already computed sample.
pub fn osculating_cyclide(sample: &InvariantSample, sign: DupinSign, tol_canal: f64) -> Result<CyclideContact> {
    let fr = sample.frame.as_ref().ok_or(Error::InvalidInput("sample carries no frame".into()))?;
    match classify(sample.theta1, sample.theta2, tol_canal) {
        Classification::Dupin => return Err(Error::DupinPoint),
        Classification::CanalTheta1 | Classification::CanalTheta2 => return Err(Error::CanalPoint),
        _ => {}
    }
    let dir = dupin_direction(sample.theta1, sample.theta2, &fr.pd, sign, tol_canal, None)?;
    let psi_c = osculating_psi(dir.t, sample.psi, [sample.a, sample.b, sample.c, sample.d]);
    let p = fr.jet.position();
    Ok(CyclideContact {
        u: sample.u,
        v: sample.v,
        position: [p[0], p[1], p[2]],
        t: dir.t,
        alpha: dir.alpha,
        psi_c,
        contact_order: 4,
        direction: dir,
    })
}

/// Sample a point and build its osculating cyclide.
pub fn osculate_at(analyzer: &Analyzer, u: f64, v: f64, sign: DupinSign) -> Result<CyclideContact> {
    osculating_cyclide(&analyzer.sample(u, v)?, sign, analyzer.tol.canal)
}

/// Coefficients of x², x³, x⁴ of a graph restricted to y = t x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CanonicalProfile {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl CanonicalProfile {
    pub fn eval(&self, x: f64) -> f64 {
        x * x * (self.c2 + x * (self.c3 + x * self.c4))
    }
}

/// Surface profile (½(1−t²), (θ₁+θ₂t³)/6, (a+4bt+6Ψt²+4ct³+dt⁴)/24).
pub fn canonical_profile(theta1: f64, theta2: f64, psi: f64, abcd: [f64; 4], t: f64) -> CanonicalProfile {
    let [a, b, c, d] = abcd;
    CanonicalProfile {
        c2: 0.5 * (1.0 - t * t),
        c3: (theta1 + theta2 * t.powi(3)) / 6.0,
        c4: (a + 4.0 * b * t + 6.0 * psi * t * t + 4.0 * c * t.powi(3) + d * t.powi(4)) / 24.0,
    }
}

pub fn sample_profile(sample: &InvariantSample, t: f64) -> CanonicalProfile {
    canonical_profile(sample.theta1, sample.theta2, sample.psi, [sample.a, sample.b, sample.c, sample.d], t)
}

/// Cyclide profile (½(1−t²), 0, (1−t⁴)/8 + Ψ_C t²/6).
pub fn cyclide_profile(psi_c: f64, t: f64) -> CanonicalProfile {
    CanonicalProfile { c2: 0.5 * (1.0 - t * t), c3: 0.0, c4: (1.0 - t.powi(4)) / 8.0 + psi_c * t * t / 6.0 }
}

/// Möbius map taking a surface point to the origin with the surface written
/// as z = ½(x² − y²) + (θ₁x³ + θ₂y³)/6 + O(4), X₁ along x.
#[derive(Clone, Debug)]
pub struct StandardPosition {
    pub map: MobiusMap,
    pub u: f64,
    pub v: f64,
    pub pd: PrincipalData,
    /// Local graph z(x, y) in standard coordinates.
    pub graph: Taylor2,
    /// Parameter offsets (du, dv) as series in (x, y).
    pub inverse: (Taylor2, Taylor2),
}

/// Series of the local graph of `s` over its first two components.
fn local_graph(s: &[Taylor2; 3]) -> Result<(Taylor2, (Taylor2, Taylor2))> {
    let (gu, gv) = invert_map(&s[0], &s[1]).ok_or(Error::DegenerateMetric)?;
    let mut z = s[2].clone();
    z.set_coeff(0, 0, 0.0);
    Ok((z.compose(&gu, &gv), (gu, gv)))
}

pub fn standard_position(surface: &SurfacePatch, u: f64, v: f64, reference: Option<[f64; 2]>) -> Result<StandardPosition> {
    const DEG: usize = 6;
    let jet = surface.eval_jet(u, v, 3)?;
    let pd = crate::surface::principal_data_aligned(&jet, reference, crate::invariants::Tolerances::default().umb)?;
    let p = jet.position();
    let rot = nalgebra::Matrix3::from_rows(&[pd.x1_amb.transpose(), pd.x2_amb.transpose(), pd.normal.transpose()]);
    let rigid = MobiusMap::identity().then(MobiusPrimitive::Translation(-p)).then(MobiusPrimitive::Rotation(rot));
    let base = surface.map().series(u, v, DEG);
    let (z, _) = local_graph(&rigid.apply(base.clone()))?;
    // A special conformal map with b = (b₁, b₂, −H/2) shifts the x y² and
    // x² y coefficients by −2μb₁ and +2μb₂ and turns the quadratic part into
    // ½μ(x² − y²); the final dilation normalizes μ to 1.
    let mu = pd.mu;
    let b = Vec3::new(z.coeff(1, 2) / (2.0 * mu), -z.coeff(2, 1) / (2.0 * mu), -0.5 * pd.h);
    let map = rigid.then(MobiusPrimitive::SpecialConformal(b)).then(MobiusPrimitive::Dilation(mu));
    let (graph, inverse) = local_graph(&map.apply(base))?;
    Ok(StandardPosition { map, u, v, pd, graph, inverse })
}

impl StandardPosition {
    /// Invariants read off the standard-position graph coefficients:
    /// (θ₁, θ₂, Ψ, a, b, c, d).
    pub fn coefficients(&self) -> [f64; 7] {
        let g = &self.graph;
        [
            6.0 * g.coeff(3, 0),
            6.0 * g.coeff(0, 3),
            4.0 * g.coeff(2, 2),
            24.0 * g.coeff(4, 0),
            6.0 * g.coeff(3, 1),
            6.0 * g.coeff(1, 3),
            24.0 * g.coeff(0, 4),
        ]
    }

    /// Height of the mapped surface above (x, y), by Newton iteration on the
    /// exact composed map started from the series inverse.
    pub fn height(&self, surface: &SurfacePatch, x: f64, y: f64) -> Result<f64> {
        let (gu, gv) = &self.inverse;
        let (mut du, mut dv) = (gu.eval(x, y), gv.eval(x, y));
        for _ in 0..30 {
            let s = self.map.apply(surface.map().series(self.u + du, self.v + dv, 1));
            let (fx, fy) = (s[0].value() - x, s[1].value() - y);
            let (a, b, c, d) = (s[0].coeff(1, 0), s[0].coeff(0, 1), s[1].coeff(1, 0), s[1].coeff(0, 1));
            let det = a * d - b * c;
            if det.abs() < 1e-300 {
                return Err(Error::DegenerateMetric);
            }
            let (su, sv) = ((d * fx - b * fy) / det, (a * fy - c * fx) / det);
            du -= su;
            dv -= sv;
            if su.abs() + sv.abs() < 1e-16 * (1.0 + du.abs() + dv.abs()) {
                break;
            }
        }
        let q = self.map.apply_point(surface.position(self.u + du, self.v + dv));
        Ok(q[2])
    }
}

/// Result of a log-log fit of |z_S − z_C| against |x|.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContactFit {
    pub order: u32,
    pub slope: f64,
    pub residual: f64,
    /// Every difference sat below the noise floor: the contact exceeds what
    /// the scales can resolve and `order` is `u32::MAX`.
    pub exact: bool,
}

/// Differences below this multiple of x² are treated as rounding noise.
pub const NOISE_FLOOR: f64 = 1e-11;
/// Absolute rounding level of standard-position heights on O(1) surfaces.
pub const ABS_NOISE_FLOOR: f64 = 1e-15;

/// Fit the leading exponent of differences sampled at scales `xs` (> 0);
/// `diffs[k]` is a representative |difference| at `xs[k]`. The contact order
/// is the exponent minus one.
pub fn fit_contact_order(xs: &[f64], diffs: &[f64], max_residual: f64) -> Result<ContactFit> {
    let floor = |x: f64| (NOISE_FLOOR * x * x).max(ABS_NOISE_FLOOR);
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(diffs).filter(|(x, d)| **d > floor(**x)).map(|(x, d)| (x.ln(), d.ln())).collect();
    if pts.is_empty() && !xs.is_empty() {
        return Ok(ContactFit { order: u32::MAX, slope: f64::INFINITY, residual: 0.0, exact: true });
    }
    if pts.len() < 3 {
        return Err(Error::FitUnstable { residual: f64::INFINITY });
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    if residual > max_residual {
        return Err(Error::FitUnstable { residual });
    }
    Ok(ContactFit { order: (slope.round() as i64 - 1).max(0) as u32, slope, residual, exact: false })
}

/// Scales x = h₀·2⁻ᵏ used by the contact check.
pub const CONTACT_H0: f64 = 0.05;
pub const CONTACT_LEVELS: usize = 6;

/// Contact order between the surface and the cyclide of `contact` along the
/// contact direction, measured in standard position.
pub fn verify_contact_order(surface: &SurfacePatch, contact: &CyclideContact) -> Result<ContactFit> {
    verify_contact_order_with(surface, contact, CONTACT_H0, CONTACT_LEVELS)
}

pub fn verify_contact_order_with(
    surface: &SurfacePatch,
    contact: &CyclideContact,
    h0: f64,
    levels: usize,
) -> Result<ContactFit> {
    if contact.direction.from_x2 {
        return Err(Error::CanalPoint);
    }
    let sp = standard_position(surface, contact.u, contact.v, None)?;
    // In standard coordinates X₁ is the x axis and the contact line is y = t x.
    let profile = cyclide_profile(contact.psi_c, contact.t);
    let mut xs = Vec::with_capacity(levels);
    let mut ds = Vec::with_capacity(levels);
    for k in 0..levels {
        let x = h0 * 0.5f64.powi(k as i32);
        let mut acc = 0.0;
        for s in [x, -x] {
            acc += (sp.height(surface, s, contact.t * s)? - profile.eval(s)).abs();
        }
        xs.push(x);
        ds.push(0.5 * acc);
    }
    fit_contact_order(&xs, &ds, 0.25)
}

/// One cell of the helcat table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableCell {
    pub alpha_label: String,
    pub alpha_h: f64,
    pub s: f64,
    pub computed: f64,
    pub printed: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub within_tolerance: bool,
    pub limit_derived: bool,
    pub note: Option<String>,
}

/// Row labels (π divisors; 0 means α = 0) and printed values for s = 0, ±1, ±2.
pub const TABLE1_ROWS: [(&str, f64, [f64; 3]); 9] = [
    ("0", 0.0, [1.5, 1.5, 1.5]),
    ("pi/100", 100.0, [1.54, 1.79, 3.18]),
    ("pi/7.384663", 7.384663, [2.0, 5.12, 31.7]),
    ("pi/6", 6.0, [2.07, 5.84, 37.96]),
    ("pi/4", 4.0, [2.17, 7.44, 52.34]),
    ("pi/3", 3.0, [2.12, 8.44, 62.33]),
    ("pi/2.25", 2.25, [1.82, 8.6, 66.32]),
    ("pi/2.1", 2.1, [1.68, 8.29, 64.62]),
    ("pi/2.01", 2.01, [1.53, 1.79, 61.68]),
];

/// The printed cell that disagrees with its neighbours.
pub const TABLE1_FLAGGED: (&str, f64) = ("pi/2.01", 1.0);

pub fn table1_tolerance(printed: f64) -> f64 {
    0.02f64.max(0.02 * printed.abs())
}

/// Ψ_C for the helcat table from the displayed invariant data; s = 0 uses the
/// constant ratio θ₁/θ₂ as a limit.
pub fn table1_value(alpha_h: f64, s: f64) -> f64 {
    let o = HelcatOracle { alpha_h };
    let (t1, t2) = o.displayed_thetas(s);
    let t = if s == 0.0 { DupinSign::Cubic.t_from_ratio(o.kappa()) } else { DupinSign::Cubic.t_from_ratio(t1 / t2) };
    osculating_psi(t, o.displayed_psi(s), fourth_order_coeffs(t1, t2, &o.displayed_theta_derivatives()))
}

/// All 27 cells: every row at s = 0, then s = ±1 and ±2 (both signs evaluated,
/// the cell reports s > 0 and checks that −s agrees).
pub fn table1() -> Vec<TableCell> {
    let mut out = Vec::new();
    for (label, div, printed) in TABLE1_ROWS {
        let alpha_h = if div == 0.0 { 0.0 } else { std::f64::consts::PI / div };
        for (k, s) in [0.0, 1.0, 2.0].into_iter().enumerate() {
            let computed = table1_value(alpha_h, s);
            let mirror = table1_value(alpha_h, -s);
            let abs_gap = (computed - printed[k]).abs();
            let flagged = label == TABLE1_FLAGGED.0 && s == TABLE1_FLAGGED.1;
            let mut note = flagged.then(|| "printed value inconsistent with neighbouring cells".to_string());
            if (computed - mirror).abs() > 1e-9 * computed.abs().max(1.0) {
                note = Some(format!("s and -s differ: {mirror}"));
            }
            out.push(TableCell {
                alpha_label: label.to_string(),
                alpha_h,
                s,
                computed,
                printed: printed[k],
                abs_gap,
                rel_gap: abs_gap / printed[k].abs(),
                within_tolerance: abs_gap <= table1_tolerance(printed[k]),
                limit_derived: s == 0.0,
                note,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cyclide_profile_has_no_cubic() {
        let p = cyclide_profile(2.0, 0.5);
        assert_eq!(p.c3, 0.0);
        assert_relative_eq!(p.c2, 0.375);
    }

    #[test]
    fn osculating_value_matches_quartic() {
        let (t1, t2, psi, abcd) = (1.0, 2.0, 0.0, [3.5, 0.25, -0.5, -3.25]);
        let t = DupinSign::Cubic.t_from_ratio(t1 / t2);
        let pc = osculating_psi(t, psi, abcd);
        let s = canonical_profile(t1, t2, psi, abcd, t);
        let c = cyclide_profile(pc, t);
        assert_relative_eq!(s.c2, c.c2);
        assert!(s.c3.abs() < 1e-15);
        assert_relative_eq!(s.c4, c.c4, epsilon = 1e-14);
    }

    #[test]
    fn fit_recovers_exponents() {
        let xs: Vec<f64> = (0..6).map(|k| 0.1 * 0.5f64.powi(k)).collect();
        let d4: Vec<f64> = xs.iter().map(|x| x.powi(4)).collect();
        let d5: Vec<f64> = xs.iter().map(|x| 3.0 * x.powi(5) * (1.0 + x)).collect();
        assert_eq!(fit_contact_order(&xs, &d4, 0.1).unwrap().order, 3);
        assert_eq!(fit_contact_order(&xs, &d5, 0.1).unwrap().order, 4);
        assert!(fit_contact_order(&xs[..2], &d4[..2], 0.1).is_err());
    }
}
