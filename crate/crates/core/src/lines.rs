//! Dupin and Darboux line fields: the Dupin direction field, fixed-step RK4
//! tracing in the parameter plane, and critical points of the Darboux angle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::invariants::{classify, Analyzer, Classification, LocalFrame};
use crate::osculation::DupinSign;
use crate::surface::Vec3;

/// Unit line element: parameter-plane components of a unit ambient vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineElement {
    pub param: [f64; 2],
    pub ambient: [f64; 3],
}

impl LineElement {
    fn amb(&self) -> Vec3 {
        Vec3::new(self.ambient[0], self.ambient[1], self.ambient[2])
    }

    fn flipped(self) -> Self {
        LineElement { param: [-self.param[0], -self.param[1]], ambient: self.ambient.map(|x| -x) }
    }

    /// Angle between the unoriented lines, in [0, π/2].
    pub fn angle_to(&self, other: &LineElement) -> f64 {
        self.amb().dot(&other.amb()).abs().min(1.0).acos()
    }
}

fn combine(fr: &LocalFrame, c1: f64, c2: f64) -> LineElement {
    let n = c1.hypot(c2);
    let (c1, c2) = (c1 / n, c2 / n);
    let pd = &fr.pd;
    let amb = pd.x1_amb * c1 + pd.x2_amb * c2;
    LineElement {
        param: [c1 * pd.x1[0] + c2 * pd.x2[0], c1 * pd.x1[1] + c2 * pd.x2[1]],
        ambient: [amb[0], amb[1], amb[2]],
    }
}

/// Direction of V = ∛θ₂·X₁ ∓ ∛θ₁·X₂ (minus for [`DupinSign::Cubic`]). On a
/// canal sample the vanishing index selects X₁ or X₂ exactly.
pub fn dupin_field(fr: &LocalFrame, sign: DupinSign, tol_canal: f64) -> Result<LineElement> {
    let s = match sign {
        DupinSign::Cubic => -1.0,
        DupinSign::Literal => 1.0,
    };
    match classify(fr.theta1, fr.theta2, tol_canal) {
        Classification::Dupin => Err(Error::DupinPoint),
        Classification::CanalTheta1 => Ok(combine(fr, 1.0, 0.0)),
        Classification::CanalTheta2 => Ok(combine(fr, 0.0, 1.0)),
        _ => Ok(combine(fr, fr.theta2.cbrt(), s * fr.theta1.cbrt())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    ReachedLength,
    HitBoundary,
    HitSingularPoint,
    /// The trace came back to its start.
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceSample {
    pub u: f64,
    pub v: f64,
    pub position: [f64; 3],
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveTrace {
    pub samples: Vec<TraceSample>,
    pub step: f64,
    pub closed: bool,
    pub termination: Termination,
}

impl CurveTrace {
    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| Vec3::from(s.position)).collect()
    }

    pub fn length(&self) -> f64 {
        self.positions().windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Halvings allowed before a step that jumps over a singular point gives up.
const MAX_HALVINGS: u32 = 10;

fn sample_at(analyzer: &Analyzer, u: f64, v: f64, alpha: Option<f64>, sigma: Option<f64>) -> TraceSample {
    let p = analyzer.surface.position(u, v);
    TraceSample { u, v, position: [p[0], p[1], p[2]], alpha, sigma }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DupinLineOptions {
    pub sign: DupinSign,
    /// Parameter-plane vector the first step should point along.
    pub initial: Option<[f64; 2]>,
}

impl Default for DupinLineOptions {
    fn default() -> Self {
        Self { sign: DupinSign::Cubic, initial: None }
    }
}

enum Probe {
    Field(LineElement, LocalFrame),
    Boundary,
    Singular,
}

fn probe(
    analyzer: &Analyzer,
    u: f64,
    v: f64,
    reference: Option<[f64; 2]>,
    sign: DupinSign,
    carry: Option<usize>,
) -> Result<Probe> {
    let fr = match analyzer.frame(u, v, reference) {
        Ok(f) => f,
        Err(Error::OutOfDomain { .. }) => return Ok(Probe::Boundary),
        Err(Error::UmbilicPoint { .. }) => return Ok(Probe::Singular),
        Err(e) => return Err(e),
    };
    match dupin_field(&fr, sign, analyzer.tol.canal) {
        Ok(el) => Ok(Probe::Field(el, fr)),
        Err(Error::DupinPoint) => {
            // A line of Dupin points on a canal surface: the characteristic
            // circle keeps its principal direction.
            match carry {
                Some(0) => Ok(Probe::Field(combine(&fr, 1.0, 0.0), fr)),
                Some(_) => Ok(Probe::Field(combine(&fr, 0.0, 1.0), fr)),
                None => Ok(Probe::Singular),
            }
        }
        Err(e) => Err(e),
    }
}

/// Principal index a canal sample snaps to; Dupin samples keep `prev`.
fn canal_axis(fr: &LocalFrame, tol_canal: f64, prev: Option<usize>) -> Option<usize> {
    match classify(fr.theta1, fr.theta2, tol_canal) {
        Classification::CanalTheta1 => Some(0),
        Classification::CanalTheta2 => Some(1),
        Classification::Dupin => prev,
        _ => None,
    }
}

/// One RK4 step of the oriented Dupin field from (u, v); `prev` fixes the
/// orientation. Returns the end point and the field there.
fn dupin_rk4(
    analyzer: &Analyzer,
    (u, v): (f64, f64),
    prev: LineElement,
    reference: [f64; 2],
    h: f64,
    sign: DupinSign,
    carry: Option<usize>,
) -> Result<std::result::Result<(f64, f64, LineElement, LocalFrame), Probe>> {
    let orient = |el: LineElement| if el.amb().dot(&prev.amb()) < 0.0 { el.flipped() } else { el };
    let mut ks = [[0.0; 2]; 4];
    let offsets = [0.0, 0.5, 0.5, 1.0];
    for stage in 0..4 {
        let (du, dv) = if stage == 0 { (0.0, 0.0) } else { (ks[stage - 1][0] * h * offsets[stage], ks[stage - 1][1] * h * offsets[stage]) };
        match probe(analyzer, u + du, v + dv, Some(reference), sign, carry)? {
            Probe::Field(el, _) => ks[stage] = orient(el).param,
            other => return Ok(Err(other)),
        }
    }
    let nu = u + h / 6.0 * (ks[0][0] + 2.0 * ks[1][0] + 2.0 * ks[2][0] + ks[3][0]);
    let nv = v + h / 6.0 * (ks[0][1] + 2.0 * ks[1][1] + 2.0 * ks[2][1] + ks[3][1]);
    match probe(analyzer, nu, nv, Some(reference), sign, carry)? {
        Probe::Field(el, fr) => Ok(Ok((nu, nv, orient(el), fr))),
        other => Ok(Err(other)),
    }
}

/// Trace a Dupin line from `seed` with ambient arc-length step `step`.
pub fn integrate_dupin_line(
    analyzer: &Analyzer,
    seed: (f64, f64),
    step: f64,
    max_length: f64,
    opts: DupinLineOptions,
) -> Result<CurveTrace> {
    if step <= 0.0 || max_length <= 0.0 {
        return Err(Error::InvalidInput("step and max_length must be positive".into()));
    }
    let (mut el, mut fr) = match probe(analyzer, seed.0, seed.1, None, opts.sign, None)? {
        Probe::Field(el, fr) => (el, fr),
        Probe::Boundary => return Err(Error::OutOfDomain { u: seed.0, v: seed.1 }),
        Probe::Singular => return Err(Error::SeedIsDupinPoint),
    };
    let want = opts.initial.unwrap_or([1.0, 0.0]);
    if el.param[0] * want[0] + el.param[1] * want[1] < 0.0 {
        el = el.flipped();
    }
    let start = analyzer.surface.position(seed.0, seed.1);
    let mut samples = vec![sample_at(analyzer, seed.0, seed.1, None, None)];
    let (mut u, mut v) = seed;
    let mut length = 0.0;
    let mut left_start = false;
    let mut carry = canal_axis(&fr, analyzer.tol.canal, None);
    let termination = loop {
        if length >= max_length - 1e-12 {
            break Termination::ReachedLength;
        }
        let mut h = step.min(max_length - length);
        let mut halvings = 0;
        let next = loop {
            match dupin_rk4(analyzer, (u, v), el, fr.pd.x1, h, opts.sign, carry)? {
                Ok((nu, nv, nel, nfr)) => {
                    // Both θ's changing sign means the step jumped over a Dupin point.
                    let tol = analyzer.tol.canal;
                    let clear = [fr.theta1, fr.theta2, nfr.theta1, nfr.theta2].iter().all(|t| t.abs() >= tol);
                    let jumped = clear && fr.theta1 * nfr.theta1 < 0.0 && fr.theta2 * nfr.theta2 < 0.0;
                    if !jumped {
                        break Ok((nu, nv, nel, nfr));
                    }
                    if halvings == MAX_HALVINGS {
                        break Err(Termination::HitSingularPoint);
                    }
                }
                Err(Probe::Boundary) if halvings == MAX_HALVINGS => break Err(Termination::HitBoundary),
                Err(Probe::Singular) if halvings == MAX_HALVINGS => break Err(Termination::HitSingularPoint),
                Err(_) => {}
            }
            h *= 0.5;
            halvings += 1;
        };
        match next {
            Ok((nu, nv, nel, nfr)) => {
                let p = analyzer.surface.position(nu, nv);
                length += (p - Vec3::from(samples.last().unwrap().position)).norm();
                u = nu;
                v = nv;
                el = nel;
                fr = nfr;
                carry = canal_axis(&fr, analyzer.tol.canal, carry);
                samples.push(sample_at(analyzer, u, v, None, None));
                let d = (p - start).norm();
                if d > 3.0 * step {
                    left_start = true;
                }
                if left_start && d < step {
                    break Termination::Closed;
                }
            }
            Err(t) => break t,
        }
    };
    Ok(CurveTrace { samples, step, closed: termination == Termination::Closed, termination })
}

/// Traces for a batch of seeds; failures are returned per seed.
pub fn integrate_dupin_lines(
    analyzer: &Analyzer,
    seeds: &[(f64, f64)],
    step: f64,
    max_length: f64,
    opts: DupinLineOptions,
    mode: ExecMode,
) -> Vec<Result<CurveTrace>> {
    mode.map_items(seeds, |&s| integrate_dupin_line(analyzer, s, step, max_length, opts))
}

/// How the conformal arc length σ accumulates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum SigmaMode {
    /// dσ = (k₁ − k₂) ds.
    #[default]
    CurvatureGap,
    /// dσ = μ ds.
    Mu,
}

impl SigmaMode {
    fn rate(self, fr: &LocalFrame) -> f64 {
        match self {
            SigmaMode::CurvatureGap => fr.pd.k1 - fr.pd.k2,
            SigmaMode::Mu => fr.pd.mu,
        }
    }
}

/// θ₁cos³α + θ₂sin³α.
pub fn darboux_rhs(theta1: f64, theta2: f64, alpha: f64) -> f64 {
    theta1 * alpha.cos().powi(3) + theta2 * alpha.sin().powi(3)
}

/// Below this |sin α cos α| the angle equation is degenerate.
pub const ANGLE_DEGENERATE: f64 = 1e-6;

struct DarbouxState {
    u: f64,
    v: f64,
    alpha: f64,
}

/// (du/ds, dv/ds, dα/ds) at a state, or `None` when the evaluation left the
/// domain or reached an umbilic.
fn darboux_deriv(analyzer: &Analyzer, s: &DarbouxState, reference: [f64; 2], mode: SigmaMode) -> Result<Option<([f64; 3], LocalFrame)>> {
    let fr = match analyzer.frame(s.u, s.v, Some(reference)) {
        Ok(f) => f,
        Err(Error::OutOfDomain { .. }) | Err(Error::UmbilicPoint { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (sa, ca) = s.alpha.sin_cos();
    let el = combine(&fr, ca, sa);
    let da = darboux_rhs(fr.theta1, fr.theta2, s.alpha) / (12.0 * sa * ca) * mode.rate(&fr);
    Ok(Some(([el.param[0], el.param[1], da], fr)))
}

fn darboux_rk4(
    analyzer: &Analyzer,
    s: &DarbouxState,
    reference: [f64; 2],
    h: f64,
    mode: SigmaMode,
) -> Result<Option<(DarbouxState, LocalFrame)>> {
    let mut ks = [[0.0; 3]; 4];
    let offsets = [0.0, 0.5, 0.5, 1.0];
    for stage in 0..4 {
        let o = if stage == 0 { [0.0; 3] } else { ks[stage - 1].map(|k| k * h * offsets[stage]) };
        let st = DarbouxState { u: s.u + o[0], v: s.v + o[1], alpha: s.alpha + o[2] };
        if (st.alpha.sin() * st.alpha.cos()).abs() < ANGLE_DEGENERATE {
            return Err(Error::AngleDegenerate);
        }
        match darboux_deriv(analyzer, &st, reference, mode)? {
            Some((k, _)) => ks[stage] = k,
            None => return Ok(None),
        }
    }
    let comb = |i: usize| h / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]);
    let next = DarbouxState { u: s.u + comb(0), v: s.v + comb(1), alpha: s.alpha + comb(2) };
    match analyzer.frame(next.u, next.v, Some(reference)) {
        Ok(fr) => Ok(Some((next, fr))),
        Err(Error::OutOfDomain { .. }) | Err(Error::UmbilicPoint { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trace a Darboux line: position moves along cos α·X₁ + sin α·X₂ by ambient
/// arc length while α follows the angle equation in σ.
pub fn integrate_darboux_line(
    analyzer: &Analyzer,
    seed: (f64, f64),
    alpha0: f64,
    step: f64,
    max_length: f64,
    mode: SigmaMode,
) -> Result<CurveTrace> {
    if step <= 0.0 || max_length <= 0.0 {
        return Err(Error::InvalidInput("step and max_length must be positive".into()));
    }
    let mut fr = analyzer.frame(seed.0, seed.1, None)?;
    if (alpha0.sin() * alpha0.cos()).abs() < ANGLE_DEGENERATE {
        return Err(Error::AngleDegenerate);
    }
    let mut state = DarbouxState { u: seed.0, v: seed.1, alpha: alpha0 };
    let mut sigma = 0.0;
    let mut samples = vec![sample_at(analyzer, seed.0, seed.1, Some(alpha0), Some(0.0))];
    let mut length = 0.0;
    let termination = loop {
        if length >= max_length - 1e-12 {
            break Termination::ReachedLength;
        }
        let h = step.min(max_length - length);
        let next = match darboux_rk4(analyzer, &state, fr.pd.x1, h, mode) {
            Ok(Some(n)) => n,
            Ok(None) => break Termination::HitBoundary,
            Err(Error::AngleDegenerate) => break Termination::HitSingularPoint,
            Err(e) => return Err(e),
        };
        let (nstate, nfr) = next;
        // sin 2α changing sign means α crossed 0 or π/2 inside the step.
        if (2.0 * nstate.alpha).sin() * (2.0 * state.alpha).sin() <= 0.0 {
            break Termination::HitSingularPoint;
        }
        let p = analyzer.surface.position(nstate.u, nstate.v);
        let ds = (p - Vec3::from(samples.last().unwrap().position)).norm();
        length += ds;
        sigma += 0.5 * (mode.rate(&fr) + mode.rate(&nfr)) * ds;
        state = nstate;
        fr = nfr;
        samples.push(sample_at(analyzer, state.u, state.v, Some(state.alpha), Some(sigma)));
        if (state.alpha.sin() * state.alpha.cos()).abs() < ANGLE_DEGENERATE {
            break Termination::HitSingularPoint;
        }
    };
    Ok(CurveTrace { samples, step, closed: false, termination })
}

/// A zero of the angle equation's right side along a Darboux trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    /// Sample index at or just before the zero.
    pub index: usize,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
    /// |tan³α + θ₁/θ₂|; `None` at Dupin points.
    pub tan_residual: Option<f64>,
    /// Angle between the trace tangent and the Dupin field; `None` where the
    /// field is undefined.
    pub tangency_angle: Option<f64>,
    /// V(log|θ₁| + log|θ₂|).
    pub genericity_plus: Option<f64>,
    /// V(log|θ₁| − log|θ₂|), which governs whether α has a strict extremum.
    pub genericity_minus: Option<f64>,
    /// α has a strict local extremum (discrete second-difference test).
    pub extremum: bool,
}

/// Relative size of the right side below which a sample counts as critical.
pub const CRITICAL_TOL: f64 = 1e-9;
/// Step for the genericity directional derivatives.
const GENERICITY_STEP: f64 = 1e-4;

fn log_thetas(analyzer: &Analyzer, u: f64, v: f64, reference: [f64; 2]) -> Result<(f64, f64)> {
    let fr = analyzer.frame(u, v, Some(reference))?;
    Ok((fr.theta1.abs().ln(), fr.theta2.abs().ln()))
}

/// V(log|θ₁| ± log|θ₂|) with V = ∛θ₂X₁ ∓ ∛θ₁X₂ (X's unit ambient vectors).
fn genericity(analyzer: &Analyzer, fr: &LocalFrame, sign: DupinSign) -> Result<(f64, f64)> {
    let el = dupin_field(fr, sign, analyzer.tol.canal)?;
    let scale = fr.theta2.cbrt().hypot(fr.theta1.cbrt());
    let h = GENERICITY_STEP;
    let (a1, a2) = log_thetas(analyzer, fr.u + h * el.param[0], fr.v + h * el.param[1], fr.pd.x1)?;
    let (b1, b2) = log_thetas(analyzer, fr.u - h * el.param[0], fr.v - h * el.param[1], fr.pd.x1)?;
    // dupin_field normalizes V; restore its length.
    let d1 = (a1 - b1) / (2.0 * h) * scale;
    let d2 = (a2 - b2) / (2.0 * h) * scale;
    Ok((d1 + d2, d1 - d2))
}

fn strict_extremum(before: f64, at: f64, after: f64) -> bool {
    let noise = 1e-12 * at.abs().max(1.0);
    let (l, r) = (before - at, after - at);
    l.abs() > noise && r.abs() > noise && l.signum() == r.signum()
}

/// Zeros of θ₁cos³α + θ₂sin³α along a Darboux trace. Sign changes are refined
/// by bisection on a single RK4 step from the preceding sample; samples where
/// the right side vanishes to rounding are reported as they are.
pub fn darboux_critical_points(
    analyzer: &Analyzer,
    trace: &CurveTrace,
    mode: SigmaMode,
    sign: DupinSign,
) -> Result<Vec<CriticalPoint>> {
    let n = trace.samples.len();
    let mut frames = Vec::with_capacity(n);
    let mut reference = None;
    for s in &trace.samples {
        let fr = analyzer.frame(s.u, s.v, reference)?;
        reference = Some(fr.pd.x1);
        frames.push(fr);
    }
    let alpha = |i: usize| trace.samples[i].alpha.unwrap_or(0.0);
    let g = |i: usize| {
        let fr = &frames[i];
        darboux_rhs(fr.theta1, fr.theta2, alpha(i)) / (fr.theta1.abs() + fr.theta2.abs()).max(1e-300)
    };
    let mut out = Vec::new();
    for i in 0..n {
        let gi = g(i);
        if gi.abs() < CRITICAL_TOL || frames[i].theta1.abs() + frames[i].theta2.abs() < analyzer.tol.canal {
            let ext = i > 0 && i + 1 < n && strict_extremum(alpha(i - 1), alpha(i), alpha(i + 1));
            out.push(describe(analyzer, i, &frames[i], alpha(i), ext, sign)?);
        } else if i + 1 < n && g(i + 1).abs() >= CRITICAL_TOL && gi * g(i + 1) < 0.0 {
            let st = DarbouxState { u: trace.samples[i].u, v: trace.samples[i].v, alpha: alpha(i) };
            let rel = |fr: &LocalFrame, a: f64| darboux_rhs(fr.theta1, fr.theta2, a);
            let full = (Vec3::from(trace.samples[i + 1].position) - Vec3::from(trace.samples[i].position)).norm();
            let (mut lo, mut hi) = (0.0, full);
            let mut best = None;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                match darboux_rk4(analyzer, &st, frames[i].pd.x1, mid, mode)? {
                    Some((ns, nfr)) => {
                        let gm = rel(&nfr, ns.alpha);
                        if gm.signum() == gi.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                        best = Some((ns, nfr));
                    }
                    None => break,
                }
            }
            if let Some((ns, nfr)) = best {
                let ext = strict_extremum(alpha(i), ns.alpha, alpha(i + 1));
                out.push(describe(analyzer, i, &nfr, ns.alpha, ext, sign)?);
            }
        }
    }
    Ok(out)
}

fn describe(analyzer: &Analyzer, index: usize, fr: &LocalFrame, alpha: f64, extremum: bool, sign: DupinSign) -> Result<CriticalPoint> {
    let dupin = fr.theta1.abs() + fr.theta2.abs() < analyzer.tol.canal;
    let mut cp = CriticalPoint {
        index,
        u: fr.u,
        v: fr.v,
        alpha,
        tan_residual: None,
        tangency_angle: None,
        genericity_plus: None,
        genericity_minus: None,
        extremum,
    };
    if dupin {
        return Ok(cp);
    }
    if fr.theta2.abs() >= analyzer.tol.canal {
        cp.tan_residual = Some((alpha.tan().powi(3) + fr.theta1 / fr.theta2).abs());
    }
    let (sa, ca) = alpha.sin_cos();
    let tangent = combine(fr, ca, sa);
    let field = dupin_field(fr, sign, analyzer.tol.canal)?;
    cp.tangency_angle = Some(tangent.angle_to(&field));
    if classify(fr.theta1, fr.theta2, analyzer.tol.canal) == Classification::Generic {
        if let Ok((p, m)) = genericity(analyzer, fr, sign) {
            cp.genericity_plus = Some(p);
            cp.genericity_minus = Some(m);
        }
    }
    Ok(cp)
}

/// Least-squares circle through ambient points: best plane by SVD, then an
/// algebraic circle fit in that plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CircleFit {
    pub center: [f64; 3],
    pub normal: [f64; 3],
    pub radius: f64,
    /// Largest distance of a point from the fitted circle.
    pub residual: f64,
}

pub fn fit_circle(points: &[Vec3]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput("circle fit needs at least three points".into()));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let m = nalgebra::DMatrix::from_fn(points.len(), 3, |i, j| points[i][j] - mean[j]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or(Error::InvalidInput("degenerate point set".into()))?;
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let axis = |k: usize| Vec3::new(vt[(order[k], 0)], vt[(order[k], 1)], vt[(order[k], 2)]);
    let (e1, e2, normal) = (axis(0), axis(1), axis(2));
    // x² + y² + D x + E y + F = 0 in plane coordinates.
    let mut a = nalgebra::DMatrix::zeros(points.len(), 3);
    let mut rhs = nalgebra::DVector::zeros(points.len());
    for (i, p) in points.iter().enumerate() {
        let (x, y) = ((p - mean).dot(&e1), (p - mean).dot(&e2));
        a[(i, 0)] = x;
        a[(i, 1)] = y;
        a[(i, 2)] = 1.0;
        rhs[i] = -(x * x + y * y);
    }
    let sol = a.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let radius = (cx * cx + cy * cy - sol[2]).sqrt();
    let center = mean + e1 * cx + e2 * cy;
    let residual = points
        .iter()
        .map(|p| {
            let d = p - center;
            let h = d.dot(&normal);
            let r = (d - normal * h).norm();
            h.hypot(r - radius)
        })
        .fold(0.0, f64::max);
    Ok(CircleFit { center: center.into(), normal: normal.into(), radius, residual })
}
