//! Pointwise conformal invariants: θ₁, θ₂, the ξ-fields, Ψ and the
//! fourth-order coefficients, plus point classification and the identity
//! checks that relate them.
//!
//! Surface jets are used up to order three. Everything of higher order is
//! obtained by central differences of the computed fields along ξ₁, ξ₂ with
//! a step measured in conformal length (ambient step h/μ), so results do not
//! depend on the scale of the surface.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::series::{Real, Taylor2};
use crate::surface::{principal_data_aligned, Domain, Jet, PrincipalData, SurfacePatch};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Relative umbilic threshold on k₁ − k₂.
    pub umb: f64,
    /// Threshold below which a θ counts as zero.
    pub canal: f64,
    /// Threshold on |ξ₁θ₂ + ξ₂θ₁| for the Ψ-from-θ formula.
    pub gen: f64,
    /// Identities involving first differences.
    pub id: f64,
    /// Cross-checks involving third differences.
    pub xcheck: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { umb: 1e-8, canal: 1e-6, gen: 1e-5, id: 1e-3, xcheck: 1e-2 }
    }
}

impl Tolerances {
    /// Defaults suited to numeric jets.
    pub fn numeric() -> Self {
        Self { canal: 1e-4, ..Self::default() }
    }
}

/// Field-differencing steps in conformal length units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct DiffSettings {
    /// Step for first differences (ξθ and the Hessian of H).
    pub h_fld: f64,
    /// Step for nested differences of depth two and three.
    pub h_nested: f64,
    pub richardson: bool,
}

impl DiffSettings {
    /// Wider steps for finite-difference jets, where noise dominates truncation.
    pub fn numeric() -> Self {
        Self { h_fld: 1e-2, h_nested: 2e-2, richardson: true }
    }
}

impl Default for DiffSettings {
    fn default() -> Self {
        Self { h_fld: 1e-3, h_nested: 1e-3, richardson: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Classification {
    Generic,
    CanalTheta1,
    CanalTheta2,
    Dupin,
    Umbilic,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Generic => "Generic",
            Classification::CanalTheta1 => "CanalTheta1",
            Classification::CanalTheta2 => "CanalTheta2",
            Classification::Dupin => "Dupin",
            Classification::Umbilic => "Umbilic",
        }
    }
}

/// First ξ-derivatives of θ₁, θ₂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaDerivatives {
    pub xi1_theta1: f64,
    pub xi2_theta1: f64,
    pub xi1_theta2: f64,
    pub xi2_theta2: f64,
}

/// a = 3 + θ₁² + ξ₁θ₁, b = −θ₁θ₂ + ξ₂θ₁, c = θ₁θ₂ + ξ₁θ₂, d = −3 − θ₂² + ξ₂θ₂.
pub fn fourth_order_coeffs(theta1: f64, theta2: f64, d: &ThetaDerivatives) -> [f64; 4] {
    [
        3.0 + theta1 * theta1 + d.xi1_theta1,
        -theta1 * theta2 + d.xi2_theta1,
        theta1 * theta2 + d.xi1_theta2,
        -3.0 - theta2 * theta2 + d.xi2_theta2,
    ]
}

pub fn classify(theta1: f64, theta2: f64, tol_canal: f64) -> Classification {
    match (theta1.abs() < tol_canal, theta2.abs() < tol_canal) {
        (true, true) => Classification::Dupin,
        (true, false) => Classification::CanalTheta1,
        (false, true) => Classification::CanalTheta2,
        (false, false) => Classification::Generic,
    }
}

/// Principal data plus θ's and the exact gradient of H at one point.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    pub u: f64,
    pub v: f64,
    pub pd: PrincipalData,
    pub theta1: f64,
    pub theta2: f64,
    pub grad_h: [f64; 2],
    pub jet: Jet,
}

impl LocalFrame {
    pub fn mu(&self) -> f64 {
        self.pd.mu
    }

    /// ξᵢ = Xᵢ/μ in parameter coordinates.
    pub fn xi(&self, i: usize) -> [f64; 2] {
        let x = if i == 1 { self.pd.x1 } else { self.pd.x2 };
        [x[0] / self.pd.mu, x[1] / self.pd.mu]
    }
}

/// Pointwise conformal package.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantSample {
    pub u: f64,
    pub v: f64,
    pub k1: f64,
    pub k2: f64,
    pub h: f64,
    pub mu: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub xi1: [f64; 2],
    pub xi2: [f64; 2],
    pub psi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub derivs: ThetaDerivatives,
    pub classification: Classification,
    #[serde(skip)]
    pub frame: Option<Box<LocalFrame>>,
}

fn cross<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1].clone() * b[2].clone() - a[2].clone() * b[1].clone(),
        a[2].clone() * b[0].clone() - a[0].clone() * b[2].clone(),
        a[0].clone() * b[1].clone() - a[1].clone() * b[0].clone(),
    ]
}

fn dot<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

/// Mean curvature and half principal difference from position derivatives.
fn shape<T: Real>(ru: &[T; 3], rv: &[T; 3], ruu: &[T; 3], ruv: &[T; 3], rvv: &[T; 3]) -> (T, T) {
    let (e, f, g) = (dot(ru, ru), dot(ru, rv), dot(rv, rv));
    let det = e.clone() * g.clone() - f.clone() * f.clone();
    let nraw = cross(ru, rv);
    let inv_len = dot(&nraw, &nraw).sqrt().recip();
    let (l, m, n) = (
        dot(ruu, &nraw) * inv_len.clone(),
        dot(ruv, &nraw) * inv_len.clone(),
        dot(rvv, &nraw) * inv_len,
    );
    let idet = det.recip();
    let w11 = (g.clone() * l.clone() - f.clone() * m.clone()) * idet.clone();
    let w12 = (g * m.clone() - f.clone() * n.clone()) * idet.clone();
    let w21 = (e.clone() * m.clone() - f.clone() * l) * idet.clone();
    let w22 = (e * n - f * m) * idet;
    let h = (w11.clone() + w22.clone()) * 0.5;
    let half = (w11 - w22) * 0.5;
    let mu = (half.clone() * half + w12 * w21).sqrt();
    (h, mu)
}

fn diff_series(s: &[Taylor2; 3], du: usize, dv: usize) -> [Taylor2; 3] {
    let d = |t: &Taylor2| {
        let mut r = t.clone();
        for _ in 0..du {
            r = r.diff_u();
        }
        for _ in 0..dv {
            r = r.diff_v();
        }
        r.truncate(1)
    };
    [d(&s[0]), d(&s[1]), d(&s[2])]
}

/// The engine: a surface with tolerances and differencing settings.
#[derive(Clone, Debug)]
pub struct Analyzer {
    pub surface: SurfacePatch,
    pub tol: Tolerances,
    pub diff: DiffSettings,
}

impl Analyzer {
    pub fn new(surface: SurfacePatch) -> Self {
        let tol = match surface.jet_source {
            crate::surface::JetSource::Analytic => Tolerances::default(),
            crate::surface::JetSource::Numeric { .. } => Tolerances::numeric(),
        };
        let diff = match surface.jet_source {
            crate::surface::JetSource::Analytic => DiffSettings::default(),
            crate::surface::JetSource::Numeric { .. } => DiffSettings::numeric(),
        };
        Self { surface, tol, diff }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_diff(mut self, diff: DiffSettings) -> Self {
        self.diff = diff;
        self
    }

    /// Frame at a domain point, X₁ aligned to `reference` when given.
    pub fn frame(&self, u: f64, v: f64, reference: Option<[f64; 2]>) -> Result<LocalFrame> {
        if !self.surface.domain.contains(u, v) {
            return Err(Error::OutOfDomain { u, v });
        }
        self.frame_unchecked(u, v, reference)
    }

    fn frame_unchecked(&self, u: f64, v: f64, reference: Option<[f64; 2]>) -> Result<LocalFrame> {
        let jet = self.surface.jet_unchecked(u, v, 3)?;
        let pd = principal_data_aligned(&jet, reference, self.tol.umb)?;
        let s = jet.series();
        let ru = diff_series(&s, 1, 0);
        let rv = diff_series(&s, 0, 1);
        let (h, mu) = shape(&ru, &rv, &diff_series(&s, 2, 0), &diff_series(&s, 1, 1), &diff_series(&s, 0, 2));
        let k1 = &h + &mu;
        let k2 = &h - &mu;
        let dir = |x: [f64; 2], k: &Taylor2| x[0] * k.coeff(1, 0) + x[1] * k.coeff(0, 1);
        let mu2 = pd.mu * pd.mu;
        let theta1 = dir(pd.x1, &k1) / mu2;
        let theta2 = dir(pd.x2, &k2) / mu2;
        let grad_h = [h.coeff(1, 0), h.coeff(0, 1)];
        Ok(LocalFrame { u, v, pd, theta1, theta2, grad_h, jet })
    }

    /// Frame at a stencil point; leaving the domain is a boundary error.
    fn stencil_frame(&self, u: f64, v: f64, reference: [f64; 2]) -> Result<LocalFrame> {
        if !self.surface.domain.contains(u, v) {
            return Err(Error::BoundaryTooClose { u, v });
        }
        self.frame_unchecked(u, v, Some(reference))
    }

    /// ξᵢ(f) at `center` by central differences along Xᵢ with conformal step `h`.
    pub fn xi_derivative(
        &self,
        i: usize,
        center: &LocalFrame,
        h: f64,
        f: &dyn Fn(&LocalFrame) -> Result<f64>,
    ) -> Result<f64> {
        let x = if i == 1 { center.pd.x1 } else { center.pd.x2 };
        let reference = center.pd.x1;
        let diff = |step: f64| -> Result<f64> {
            let amb = step / center.pd.mu;
            let p = self.stencil_frame(center.u + amb * x[0], center.v + amb * x[1], reference)?;
            let m = self.stencil_frame(center.u - amb * x[0], center.v - amb * x[1], reference)?;
            Ok((f(&p)? - f(&m)?) / (2.0 * step))
        };
        let coarse = diff(h)?;
        if self.diff.richardson {
            Ok((4.0 * diff(0.5 * h)? - coarse) / 3.0)
        } else {
            Ok(coarse)
        }
    }

    pub fn theta_derivatives(&self, center: &LocalFrame) -> Result<ThetaDerivatives> {
        let h = self.diff.h_fld;
        let t1 = |f: &LocalFrame| Ok(f.theta1);
        let t2 = |f: &LocalFrame| Ok(f.theta2);
        Ok(ThetaDerivatives {
            xi1_theta1: self.xi_derivative(1, center, h, &t1)?,
            xi2_theta1: self.xi_derivative(2, center, h, &t1)?,
            xi1_theta2: self.xi_derivative(1, center, h, &t2)?,
            xi2_theta2: self.xi_derivative(2, center, h, &t2)?,
        })
    }

    /// Laplace–Beltrami of H: exact gradient from the jet, Hessian by central
    /// differences of that gradient, Christoffel symbols from the jet.
    pub fn laplace_beltrami_h(&self, center: &LocalFrame) -> Result<f64> {
        let j = &center.jet;
        let (ru, rv) = (j.d(1, 0), j.d(0, 1));
        let [e, f, g] = center.pd.metric;
        let det = e * g - f * f;
        let ginv = [[g / det, -f / det], [-f / det, e / det]];
        let amb = self.diff.h_fld / center.pd.mu;
        let (du, dv) = (amb / ru.norm(), amb / rv.norm());
        let reference = center.pd.x1;
        let grad_at = |uu: f64, vv: f64| -> Result<[f64; 2]> { Ok(self.stencil_frame(uu, vv, reference)?.grad_h) };
        let hessian = |s: f64| -> Result<[[f64; 2]; 2]> {
            let (up, um) = (grad_at(center.u + s * du, center.v)?, grad_at(center.u - s * du, center.v)?);
            let (vp, vm) = (grad_at(center.u, center.v + s * dv)?, grad_at(center.u, center.v - s * dv)?);
            let huu = (up[0] - um[0]) / (2.0 * s * du);
            let hvv = (vp[1] - vm[1]) / (2.0 * s * dv);
            let huv = 0.5 * ((up[1] - um[1]) / (2.0 * s * du) + (vp[0] - vm[0]) / (2.0 * s * dv));
            Ok([[huu, huv], [huv, hvv]])
        };
        let hess = if self.diff.richardson {
            let (c, fine) = (hessian(1.0)?, hessian(0.5)?);
            let r = |a: f64, b: f64| (4.0 * b - a) / 3.0;
            [[r(c[0][0], fine[0][0]), r(c[0][1], fine[0][1])], [r(c[1][0], fine[1][0]), r(c[1][1], fine[1][1])]]
        } else {
            hessian(1.0)?
        };
        let second = [[j.d(2, 0), j.d(1, 1)], [j.d(1, 1), j.d(0, 2)]];
        let tangent = [ru, rv];
        let mut lap = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                // Γ^k_ab ∂_k H = g^{kl} (r_ab · r_l) ∂_k H
                let mut gamma_term = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        gamma_term += ginv[k][l] * second[a][b].dot(&tangent[l]) * center.grad_h[k];
                    }
                }
                lap += ginv[a][b] * (hess[a][b] - gamma_term);
            }
        }
        Ok(lap)
    }

    /// μ⁻³(ΔH + 2μ²H).
    pub fn mean_curvature_term(&self, center: &LocalFrame) -> Result<f64> {
        let mu = center.pd.mu;
        Ok((self.laplace_beltrami_h(center)? + 2.0 * mu * mu * center.pd.h) / (mu * mu * mu))
    }

    /// Ψ = μ⁻³(ΔH + 2μ²H) − ½(θ₁² − θ₂² + ξ₁θ₁ + ξ₂θ₂).
    pub fn psi_at(&self, center: &LocalFrame, d: &ThetaDerivatives) -> Result<f64> {
        let (t1, t2) = (center.theta1, center.theta2);
        Ok(self.mean_curvature_term(center)? - 0.5 * (t1 * t1 - t2 * t2 + d.xi1_theta1 + d.xi2_theta2))
    }

    pub fn sample(&self, u: f64, v: f64) -> Result<InvariantSample> {
        self.sample_aligned(u, v, None)
    }

    pub fn sample_aligned(&self, u: f64, v: f64, reference: Option<[f64; 2]>) -> Result<InvariantSample> {
        let fr = self.frame(u, v, reference)?;
        let d = self.theta_derivatives(&fr)?;
        let psi = self.psi_at(&fr, &d)?;
        let [a, b, c, dd] = fourth_order_coeffs(fr.theta1, fr.theta2, &d);
        Ok(InvariantSample {
            u,
            v,
            k1: fr.pd.k1,
            k2: fr.pd.k2,
            h: fr.pd.h,
            mu: fr.pd.mu,
            theta1: fr.theta1,
            theta2: fr.theta2,
            xi1: fr.xi(1),
            xi2: fr.xi(2),
            psi,
            a,
            b,
            c,
            d: dd,
            derivs: d,
            classification: classify(fr.theta1, fr.theta2, self.tol.canal),
            frame: Some(Box::new(fr)),
        })
    }

    /// Samples over a list of points. Each row of a `n1`-wide grid is swept in
    /// order with X₁ aligned to its predecessor; rows run in parallel.
    pub fn sweep_grid(&self, domain: &Domain, n1: usize, n2: usize, mode: ExecMode) -> Vec<Result<InvariantSample>> {
        let pts = domain.grid(n1, n2);
        let rows = mode.map(n2, |j| {
            let mut reference: Option<[f64; 2]> = None;
            let mut out = Vec::with_capacity(n1);
            for i in 0..n1 {
                let (u, v) = pts[j * n1 + i];
                let r = self.sample_aligned(u, v, reference);
                if let Ok(s) = &r {
                    reference = s.frame.as_ref().map(|f| f.pd.x1);
                }
                out.push(r);
            }
            out
        });
        rows.into_iter().flatten().collect()
    }

    /// Nested derivative ξ_{path[0]}(ξ_{path[1]}(…θ_k)) with the nested step.
    pub fn nested_theta_derivative(&self, center: &LocalFrame, path: &[usize], k: usize) -> Result<f64> {
        fn go(a: &Analyzer, fr: &LocalFrame, path: &[usize], k: usize) -> Result<f64> {
            match path.split_first() {
                None => Ok(if k == 1 { fr.theta1 } else { fr.theta2 }),
                Some((&i, rest)) => a.xi_derivative(i, fr, a.diff.h_nested, &|q| go(a, q, rest, k)),
            }
        }
        go(self, center, path, k)
    }

    /// Ψ from θ's alone via nested ξ-differences; refuses when
    /// |ξ₁θ₂ + ξ₂θ₁| is below tolerance.
    pub fn psi_from_thetas(&self, u: f64, v: f64) -> Result<f64> {
        let fr = self.frame(u, v, None)?;
        let n = |path: &[usize], k| self.nested_theta_derivative(&fr, path, k);
        let x1t2 = n(&[1], 2)?;
        let x2t1 = n(&[2], 1)?;
        let den = x1t2 + x2t1;
        let scale = 1.0f64.max(fr.theta1.hypot(fr.theta2));
        if den.abs() < self.tol.gen * scale {
            return Err(Error::DegenerateDenominator { value: den });
        }
        let terms = ThetaJets {
            t1: fr.theta1,
            t2: fr.theta2,
            x1t1: n(&[1], 1)?,
            x2t1,
            x1t2,
            x2t2: n(&[2], 2)?,
            x11t1: n(&[1, 1], 1)?,
            x11t2: n(&[1, 1], 2)?,
            x22t1: n(&[2, 2], 1)?,
            x22t2: n(&[2, 2], 2)?,
            x222t1: n(&[2, 2, 2], 1)?,
            x111t2: n(&[1, 1, 1], 2)?,
        };
        Ok(terms.psi())
    }

    /// Ψ on a canal point from the vanishing index: −2 − ξ₁³θ₂/ξ₁θ₂ when
    /// θ₁ = 0, and the orientation-mirrored 2 + ξ₂³θ₁/ξ₂θ₁ when θ₂ = 0.
    pub fn canal_psi(&self, u: f64, v: f64) -> Result<f64> {
        let fr = self.frame(u, v, None)?;
        match classify(fr.theta1, fr.theta2, self.tol.canal) {
            Classification::CanalTheta1 => {
                let num = self.nested_theta_derivative(&fr, &[1, 1, 1], 2)?;
                let den = self.nested_theta_derivative(&fr, &[1], 2)?;
                Ok(-2.0 - num / den)
            }
            Classification::CanalTheta2 => {
                let num = self.nested_theta_derivative(&fr, &[2, 2, 2], 1)?;
                let den = self.nested_theta_derivative(&fr, &[2], 1)?;
                Ok(2.0 + num / den)
            }
            Classification::Dupin => Err(Error::DupinPoint),
            _ => Err(Error::InvalidInput("point is not a canal point".into())),
        }
    }

    /// Coefficients (c₁, c₂) of [ξ₁, ξ₂] = c₁ξ₁ + c₂ξ₂ by field differencing.
    pub fn bracket_coefficients(&self, u: f64, v: f64) -> Result<(f64, f64, LocalFrame)> {
        let fr = self.frame(u, v, None)?;
        let h = self.diff.h_fld;
        let comp = |i: usize, k: usize| move |q: &LocalFrame| Ok(q.xi(i)[k]);
        let mut br = [0.0; 2];
        for (k, slot) in br.iter_mut().enumerate() {
            *slot = self.xi_derivative(1, &fr, h, &comp(2, k))? - self.xi_derivative(2, &fr, h, &comp(1, k))?;
        }
        let (a, b) = (fr.xi(1), fr.xi(2));
        let det = a[0] * b[1] - a[1] * b[0];
        let c1 = (br[0] * b[1] - br[1] * b[0]) / det;
        let c2 = (a[0] * br[1] - a[1] * br[0]) / det;
        Ok((c1, c2, fr))
    }

    /// Deviation of [ξ₁, ξ₂] from −½(θ₂ξ₁ + θ₁ξ₂), in frame coefficients.
    pub fn bracket_residual(&self, u: f64, v: f64) -> Result<f64> {
        let (c1, c2, fr) = self.bracket_coefficients(u, v)?;
        Ok((c1 + 0.5 * fr.theta2).abs().max((c2 + 0.5 * fr.theta1).abs()))
    }
}

/// θ's and the ξ-derivatives entering the Ψ-from-θ formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaJets {
    pub t1: f64,
    pub t2: f64,
    pub x1t1: f64,
    pub x2t1: f64,
    pub x1t2: f64,
    pub x2t2: f64,
    pub x11t1: f64,
    pub x11t2: f64,
    pub x22t1: f64,
    pub x22t2: f64,
    pub x222t1: f64,
    pub x111t2: f64,
}

impl ThetaJets {
    pub fn denominator(&self) -> f64 {
        self.x1t2 + self.x2t1
    }

    pub fn numerator(&self) -> f64 {
        let ThetaJets { t1, t2, x1t1, x2t1, x1t2, x2t2, x11t1, x11t2, x22t1, x22t2, x222t1, x111t2 } = *self;
        -6.0 * t1 * t2 + 2.0 * (x2t1 - x1t2) + 4.0 * (t2 * t2 * x2t1 - t1 * t1 * x1t2)
            - 1.5 * (t1 * t2.powi(3) + t2 * t1.powi(3))
            - 3.0 * x1t1 * x1t2
            - 3.0 * x2t1 * x2t2
            + 3.5 * t1 * t2 * (x2t2 - x1t1)
            - 3.5 * (t2 * x22t1 + t1 * x11t2)
            - t1 * x22t2
            - t2 * x11t1
            + x222t1
            - x111t2
    }

    pub fn psi(&self) -> f64 {
        self.numerator() / self.denominator()
    }
}

pub fn conformal_curvatures(surface: &SurfacePatch, u: f64, v: f64) -> Result<(f64, f64, [f64; 2], [f64; 2])> {
    let fr = Analyzer::new(surface.clone()).frame(u, v, None)?;
    Ok((fr.theta1, fr.theta2, fr.xi(1), fr.xi(2)))
}

pub fn psi_invariant(surface: &SurfacePatch, u: f64, v: f64) -> Result<f64> {
    Ok(Analyzer::new(surface.clone()).sample(u, v)?.psi)
}

pub fn classify_point(sample: &InvariantSample, tol: &Tolerances) -> Classification {
    classify(sample.theta1, sample.theta2, tol.canal)
}

pub fn willmore_density(sample: &InvariantSample) -> f64 {
    sample.mu * sample.mu
}

/// ∫ μ² dA over `domain` by the midpoint rule on an `n × n` grid; umbilic
/// cells contribute zero.
pub fn willmore_energy(surface: &SurfacePatch, domain: &Domain, n: usize, mode: ExecMode) -> Result<f64> {
    let (du, dv) = ((domain.u_max - domain.u_min) / n as f64, (domain.v_max - domain.v_min) / n as f64);
    let parts = mode.map(n, |j| -> Result<f64> {
        let v = domain.v_min + (j as f64 + 0.5) * dv;
        let mut acc = 0.0;
        for i in 0..n {
            let u = domain.u_min + (i as f64 + 0.5) * du;
            let jet = surface.jet_unchecked(u, v, 2)?;
            let area = jet.d(1, 0).cross(&jet.d(0, 1)).norm();
            match principal_data_aligned(&jet, None, 1e-8) {
                Ok(pd) => acc += pd.mu * pd.mu * area,
                Err(Error::UmbilicPoint { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(acc * du * dv)
    });
    parts.into_iter().sum()
}

/// Tests solvability of [uξ₁, uξ₂] = 0 for positive u. Writing φ = log u the
/// condition is ξ₁φ = θ₁/2, ξ₂φ = −θ₂/2, whose compatibility through the
/// bracket relation is ξ₁θ₂ + ξ₂θ₁ = 0. Returns the largest violation over
/// the sample points together with the verdict at tolerance `tol`.
pub fn isothermic_residual(analyzer: &Analyzer, points: &[(f64, f64)], mode: ExecMode) -> Result<f64> {
    let vals = mode.map_items(points, |&(u, v)| -> Result<f64> {
        let fr = analyzer.frame(u, v, None)?;
        let d = analyzer.theta_derivatives(&fr)?;
        Ok((d.xi1_theta2 + d.xi2_theta1).abs())
    });
    let mut worst = 0.0f64;
    for v in vals {
        worst = worst.max(v?);
    }
    Ok(worst)
}

pub fn isothermic_check(analyzer: &Analyzer, points: &[(f64, f64)], mode: ExecMode) -> Result<bool> {
    Ok(isothermic_residual(analyzer, points, mode)? < analyzer.tol.id)
}
