use std::f64::consts::PI;

use approx::assert_relative_eq;
use cyclide_core::catalog::{
    make_canonical, make_ellipsoid, make_graph, make_helcat, make_sphere, make_torus, make_tube, CanonicalCoeffs,
    CenterCurve,
};
use cyclide_core::exec::ExecMode;
use cyclide_core::invariants::{isothermic_check, willmore_energy, Analyzer, Classification};
use cyclide_core::surface::{mobius_transform, Domain, MobiusMap, MobiusPrimitive, Vec3};
use cyclide_core::Error;

fn generic_graph() -> Analyzer {
    Analyzer::new(
        make_graph(vec![(2, 0, 0.5), (0, 2, 0.2), (3, 0, 0.3), (1, 2, 0.1), (0, 3, 0.15), (2, 2, 0.2)]).patch,
    )
}

// Reference values from an independent high-precision standard-position
// computation (rigid motion, special conformal map, dilation, read-off).
#[test]
fn generic_graph_matches_standard_position_values() {
    let s = generic_graph().sample(0.3, 0.2).unwrap();
    assert_relative_eq!(s.theta1, -4.968733561, epsilon = 1e-8);
    assert_relative_eq!(s.theta2, 6.130913447, epsilon = 1e-8);
    assert_relative_eq!(s.psi, -11.7053327556, epsilon = 1e-6);
    assert_relative_eq!(s.a, -247.2188034, epsilon = 1e-5);
    assert_relative_eq!(s.b, -3.952664667, epsilon = 1e-6);
    assert_relative_eq!(s.c, -12.31631298, epsilon = 1e-6);
    assert_relative_eq!(s.d, -46.13602556, epsilon = 1e-6);
}

#[test]
fn ellipsoid_matches_standard_position_values() {
    let s = Analyzer::new(make_ellipsoid([1.0, 1.5, 0.7]).patch).sample(0.4, 0.3).unwrap();
    // Only the moduli of θ's are frame-independent.
    assert_relative_eq!(s.theta1.abs(), 0.4618962277, epsilon = 1e-8);
    assert_relative_eq!(s.theta2.abs(), 4.799295723, epsilon = 1e-8);
    assert_relative_eq!(s.psi, -3.11250991539, epsilon = 1e-6);
    assert_relative_eq!(s.a, 1.682595205, epsilon = 1e-6);
    assert_relative_eq!(s.d, 5.657956454, epsilon = 1e-6);
    assert_relative_eq!(s.b.abs(), 0.3694627650, epsilon = 1e-6);
    assert_relative_eq!(s.b + s.c, 0.0, epsilon = 1e-6);
}

#[test]
fn canonical_surface_returns_its_coefficients() {
    let c = CanonicalCoeffs::new(1.0, 2.0, 0.0, 3.5, 0.25, -0.5, -3.25);
    let s = Analyzer::new(make_canonical(c).patch).sample(0.0, 0.0).unwrap();
    let got = [s.theta1, s.theta2, s.psi, s.a, s.b, s.c, s.d];
    for (g, e) in got.iter().zip(c.to_array()) {
        assert_relative_eq!(*g, e, epsilon = 1e-7);
    }
}

#[test]
fn torus_is_dupin_with_cyclide_coefficients() {
    let an = Analyzer::new(make_torus(2.0, 1.0).unwrap().patch);
    let s = an.sample(0.4, 0.7).unwrap();
    assert!(s.theta1.abs() < 1e-10 && s.theta2.abs() < 1e-10);
    assert_eq!(s.classification, Classification::Dupin);
    for (g, e) in [s.a, s.b, s.c, s.d].iter().zip([3.0, 0.0, 0.0, -3.0]) {
        assert_relative_eq!(*g, e, epsilon = 1e-8);
    }
    assert!(matches!(an.psi_from_thetas(0.4, 0.7), Err(Error::DegenerateDenominator { .. })));
}

/// ΔH on the torus from the closed form of H(v), differentiated by hand.
fn torus_psi_closed_form(big_r: f64, r: f64, v: f64) -> f64 {
    let w = big_r + r * v.cos();
    // Inward normal: principal curvatures 1/r and cos v / w.
    let h = 0.5 * (1.0 / r + v.cos() / w);
    let mu = 0.5 * (1.0 / r - v.cos() / w);
    let dh = |v: f64| -0.5 * big_r * v.sin() / (big_r + r * v.cos()).powi(2);
    // ΔH = (1/(r w)) ∂v((w/r) ∂v H)
    let eps = 1e-5;
    let flux = |v: f64| (big_r + r * v.cos()) / r * dh(v);
    let lap = (flux(v + eps) - flux(v - eps)) / (2.0 * eps) / (r * w);
    // The patch normal points outward, which flips H and hence Ψ.
    -(lap + 2.0 * mu * mu * h) / mu.powi(3)
}

#[test]
fn torus_psi_matches_closed_form_laplacian() {
    let an = Analyzer::new(make_torus(2.0, 1.0).unwrap().patch);
    for v in [0.7, PI / 2.0, 2.0] {
        let s = an.sample(0.3, v).unwrap();
        // Dupin: θ terms vanish, so Ψ equals the mean-curvature term.
        assert_relative_eq!(s.psi, torus_psi_closed_form(2.0, 1.0, v), epsilon = 1e-6);
    }
    assert_relative_eq!(an.sample(0.3, 0.7).unwrap().psi, -1.0, epsilon = 1e-8);
}

#[test]
fn helcat_pipeline_matches_exact_invariants() {
    for alpha in [0.0, PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0] {
        let e = make_helcat(alpha);
        let o = e.oracle.unwrap();
        let an = Analyzer::new(e.patch);
        for (s, t) in [(1.0, 0.0), (-0.7, 2.5), (1.8, 5.0)] {
            let x = an.sample(s, t).unwrap();
            let (t1, t2) = o.true_thetas(s);
            assert_relative_eq!(x.theta1, t1, epsilon = 1e-9);
            assert_relative_eq!(x.theta2, t2, epsilon = 1e-9);
            assert_relative_eq!(x.psi, o.true_psi(s), epsilon = 1e-7);
            let abcd = o.true_abcd(s);
            for (g, e) in [x.a, x.b, x.c, x.d].iter().zip(abcd) {
                assert_relative_eq!(*g, e, epsilon = 1e-7);
            }
            let (xi1, xi2) = o.true_xi(s);
            for k in 0..2 {
                assert_relative_eq!(x.xi1[k], xi1[k], epsilon = 1e-10);
                assert_relative_eq!(x.xi2[k], xi2[k], epsilon = 1e-10);
            }
        }
    }
}

#[test]
fn helcat_classification() {
    let an = Analyzer::new(make_helcat(PI / 4.0).patch);
    assert_eq!(an.sample(0.0, 1.0).unwrap().classification, Classification::Dupin);
    assert_eq!(an.sample(0.5, 1.0).unwrap().classification, Classification::Generic);
    let cat = Analyzer::new(make_helcat(PI / 2.0).patch);
    assert_eq!(cat.sample(0.5, 1.0).unwrap().classification, Classification::CanalTheta1);
}

#[test]
fn psi_from_thetas_agrees_on_generic_graph() {
    let an = generic_graph();
    let direct = an.sample(0.3, 0.2).unwrap().psi;
    let via = an.psi_from_thetas(0.3, 0.2).unwrap();
    assert!((direct - via).abs() < an.tol.xcheck, "{direct} {via}");
}

#[test]
fn psi_from_thetas_is_degenerate_on_helcats() {
    // Minimal surfaces are isothermic, which is exactly ξ₁θ₂ + ξ₂θ₁ = 0.
    let an = Analyzer::new(make_helcat(PI / 4.0).patch);
    assert!(matches!(an.psi_from_thetas(1.0, 0.0), Err(Error::DegenerateDenominator { .. })));
}

#[test]
fn bracket_identity_on_several_surfaces() {
    let surfaces = vec![
        make_helcat(PI / 4.0).patch,
        make_torus(2.0, 1.0).unwrap().patch,
        make_tube(CenterCurve::Helix { radius: 2.0, pitch: 0.5 }, 0.4).unwrap().patch,
        make_ellipsoid([1.0, 1.5, 0.7]).patch,
        generic_graph().surface,
    ];
    for s in surfaces {
        let an = Analyzer::new(s);
        let r = an.bracket_residual(0.3, 0.2).unwrap();
        assert!(r < 1e-6, "{r}");
    }
}

#[test]
fn canal_tube_formula() {
    let an = Analyzer::new(make_tube(CenterCurve::Helix { radius: 2.0, pitch: 0.5 }, 0.4).unwrap().patch);
    for (u, v) in [(0.3, 0.2), (1.0, 2.0), (2.0, -1.0)] {
        let s = an.sample(u, v).unwrap();
        assert!(matches!(s.classification, Classification::CanalTheta1 | Classification::CanalTheta2));
        let c = an.canal_psi(u, v).unwrap();
        assert!((c - s.psi).abs() < 1e-2 * s.psi.abs().max(1.0), "{c} {}", s.psi);
    }
}

#[test]
fn sign_flip_covariance() {
    let an = generic_graph();
    let base = an.sample(0.3, 0.2).unwrap();
    let fr = base.frame.as_ref().unwrap();
    let flipped = an.sample_aligned(0.3, 0.2, Some([-fr.pd.x1[0], -fr.pd.x1[1]])).unwrap();
    // Flipping X1 also flips X2 = n × X1, so both θ's change sign.
    assert_relative_eq!(flipped.theta1, -base.theta1, epsilon = 1e-12);
    assert_relative_eq!(flipped.theta2, -base.theta2, epsilon = 1e-12);
    assert_relative_eq!(flipped.psi, base.psi, epsilon = 1e-8);
    assert_relative_eq!(flipped.a, base.a, epsilon = 1e-7);
    assert_eq!(flipped.classification, base.classification);
}

#[test]
fn invariance_under_mobius_maps() {
    let base = make_helcat(PI / 4.0).patch;
    let maps = [
        MobiusMap::identity().then(MobiusMap::rotation_axis_angle(Vec3::new(1.0, 2.0, 0.5), 0.7)),
        MobiusMap::identity().then(MobiusPrimitive::Dilation(3.0)),
        MobiusMap::identity().then(MobiusPrimitive::SpecialConformal(Vec3::new(0.1, -0.2, 0.05))),
    ];
    let an = Analyzer::new(base.clone());
    let x = an.sample(0.8, 0.4).unwrap();
    for m in maps {
        let y = Analyzer::new(mobius_transform(&base, &m).unwrap()).sample(0.8, 0.4).unwrap();
        assert_relative_eq!(x.theta1, y.theta1, epsilon = 1e-7);
        assert_relative_eq!(x.theta2, y.theta2, epsilon = 1e-7);
        assert_relative_eq!(x.psi, y.psi, epsilon = 1e-6);
    }
    // An inversion reverses orientation: the principal indices swap and Ψ
    // changes sign.
    let inv = MobiusMap::identity()
        .then(MobiusPrimitive::Translation(Vec3::new(0.5, -3.0, 0.2)))
        .then(MobiusPrimitive::Inversion);
    let y = Analyzer::new(mobius_transform(&base, &inv).unwrap()).sample(0.8, 0.4).unwrap();
    assert_relative_eq!(y.theta1.abs(), x.theta2.abs(), epsilon = 1e-7);
    assert_relative_eq!(y.theta2.abs(), x.theta1.abs(), epsilon = 1e-7);
    assert_relative_eq!(y.psi, -x.psi, epsilon = 1e-6);
}

#[test]
fn willmore_energy_of_clifford_torus() {
    let r = 1.0;
    let t = make_torus(2f64.sqrt() * r, r).unwrap().patch;
    let d = Domain::new(0.0, 2.0 * PI, 0.0, 2.0 * PI);
    let w = willmore_energy(&t, &d, 64, ExecMode::Parallel).unwrap();
    assert_relative_eq!(w, 2.0 * PI * PI, epsilon = 1e-9);
    let scaled = mobius_transform(&t, &MobiusMap::identity().then(MobiusPrimitive::Dilation(2.5))).unwrap();
    assert_relative_eq!(willmore_energy(&scaled, &d, 64, ExecMode::Sequential).unwrap(), w, epsilon = 1e-9);
}

#[test]
fn sphere_is_umbilic() {
    let an = Analyzer::new(make_sphere(1.0).patch);
    assert!(matches!(an.sample(0.3, 0.2), Err(Error::UmbilicPoint { .. })));
    let e = willmore_energy(&make_sphere(1.0).patch, &Domain::new(0.0, 1.0, 0.0, 1.0), 8, ExecMode::Sequential);
    assert_eq!(e.unwrap(), 0.0);
}

#[test]
fn isothermic_check_separates_surfaces() {
    let pts = [(0.3, 0.2), (0.5, -0.1), (-0.2, 0.4)];
    let seq = ExecMode::Sequential;
    // Minimal surfaces and quadrics are isothermic.
    assert!(isothermic_check(&Analyzer::new(make_helcat(PI / 4.0).patch), &pts, seq).unwrap());
    assert!(isothermic_check(&Analyzer::new(make_ellipsoid([1.0, 1.5, 0.7]).patch), &pts, seq).unwrap());
    assert!(!isothermic_check(&generic_graph(), &pts, seq).unwrap());
}

#[test]
fn sweep_modes_agree() {
    let an = generic_graph();
    let d = Domain::new(-0.5, 0.5, -0.5, 0.5);
    let a = an.sweep_grid(&d, 6, 5, ExecMode::Parallel);
    let b = an.sweep_grid(&d, 6, 5, ExecMode::Sequential);
    assert_eq!(a.len(), 30);
    for (x, y) in a.iter().zip(&b) {
        let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
        assert_eq!((x.u, x.v, x.psi.to_bits()), (y.u, y.v, y.psi.to_bits()));
    }
}
