use std::f64::consts::PI;

use approx::assert_relative_eq;
use cyclide_core::catalog::{make_canonical, make_graph, make_torus, CanonicalCoeffs};
use cyclide_core::exec::ExecMode;
use cyclide_core::intersect::*;
use cyclide_core::osculation::{osculating_psi, DupinSign};
use cyclide_core::Error;
use proptest::prelude::*;

fn generic() -> CanonicalCoeffs {
    CanonicalCoeffs::new(1.0, 2.0, 0.0, 3.5, 0.25, -0.5, -3.25)
}

fn osculating_value() -> f64 {
    let c = generic();
    let t = DupinSign::Cubic.t_from_ratio(c.theta1 / c.theta2);
    osculating_psi(t, c.psi, [c.a, c.b, c.c, c.d])
}

#[test]
fn predicted_section_angles() {
    assert_relative_eq!(sphere_section_angle(1.0, -1.0, PI / 4.0).unwrap(), PI / 2.0);
    assert_eq!(sphere_section_angle(1.0, -1.0, 0.0).unwrap(), 0.0);
    assert!(matches!(sphere_section_angle(0.5, 0.5, 0.3), Err(Error::UmbilicPoint { .. })));
    assert!(sphere_section_angle(1.0, 0.0, 2.0).is_err());
}

#[test]
fn measured_section_angles_on_the_quadric() {
    let g = make_graph(vec![(2, 0, 0.5), (0, 2, -0.5)]).patch;
    for alpha in [PI / 6.0, PI / 4.0, PI / 3.0] {
        let m = measured_section_angle(&g, 0.0, 0.0, alpha, 1e-4).unwrap();
        assert!((m - 2.0 * alpha).abs() < 1e-2, "{alpha} {m}");
    }
    let t = make_torus(2.0, 1.0).unwrap().patch;
    let m = measured_section_angle(&t, 0.4, 0.7, 0.3, 1e-4).unwrap();
    assert!((m - 0.6).abs() < 1e-3);
}

#[test]
fn osculating_spheres_give_cusps() {
    let s = make_canonical(CanonicalCoeffs::new(1.0, 0.5, 0.3, 0.0, 0.0, 0.0, 0.0)).patch;
    assert!(measured_section_angle(&s, 0.0, 0.0, 0.0, 1e-4).unwrap() < 2e-2);
    assert!((measured_section_angle(&s, 0.0, 0.0, PI / 2.0, 1e-4).unwrap() - PI).abs() < 2e-2);
}

#[test]
fn osculating_value_of_the_fixed_configuration() {
    assert_relative_eq!(osculating_value(), 0.2409225992051419, epsilon = 1e-14);
}

#[test]
fn component_counts_match_the_sign_oracle() {
    // Dense sign-grid oracle: 4000² samples on [−1, 1]², cells with a sign
    // change labeled by 8-connectivity.
    let psi = osculating_value();
    for (psi_c, want) in [(psi, 1), (psi - 2.0, 1), (psi + 2.0, 1)] {
        for n in [128, 256] {
            let set = trace_cyclide_intersection(generic(), psi_c, 1.0, n, ExecMode::Parallel).unwrap();
            assert_eq!(set.components, want, "psi_c {psi_c} n {n}");
            assert_eq!(set.origin_component_index, Some(0));
            let f = PencilDifference::new(generic(), psi_c);
            for p in set.polylines.iter().flat_map(|p| &p.points) {
                assert!(f.eval(p[0], p[1]).abs() < set.tol_iso);
            }
        }
    }
}

#[test]
fn components_disappear_only_beyond_the_trusted_window() {
    // Same oracle on [−1.5, 1.5]²: 1, 1 and 2 components.
    let psi = osculating_value();
    assert!(matches!(
        trace_cyclide_intersection(generic(), psi, 1.5, 128, ExecMode::Parallel),
        Err(Error::WindowTooLarge { .. })
    ));
    let count = |psi_c| trace_unchecked(generic(), psi_c, 1.5, 128, ExecMode::Parallel).unwrap().components;
    assert_eq!(count(psi), 1);
    assert_eq!(count(psi - 2.0), 1);
    assert_eq!(count(psi + 2.0), 2);
}

#[test]
fn osculating_intersection_contains_the_contact_line() {
    // Along y = t x the difference vanishes through order four, and the
    // truncation has nothing beyond.
    let psi = osculating_value();
    let f = PencilDifference::new(generic(), psi);
    let t = DupinSign::Cubic.t_from_ratio(0.5);
    for x in [-0.9, -0.3, 0.2, 0.7] {
        assert!(f.eval(x, t * x).abs() < 1e-15);
    }
}

#[test]
fn single_branch_through_the_origin() {
    // The lowest part (θ₁x³ + θ₂y³)/6 has one real linear factor, so every
    // member of the pencil meets the surface along one smooth branch at p.
    let t = DupinSign::Cubic.t_from_ratio(0.5);
    for offset in [0.0, 2.0, -2.0] {
        let set = trace_cyclide_intersection(generic(), osculating_value() + offset, 1.0, 64, ExecMode::Sequential).unwrap();
        let o = set.origin.unwrap();
        assert_eq!(o.order, 3);
        assert_eq!(o.tangents.len(), 1);
        assert_relative_eq!(o.tangents[0], t.atan() + PI, epsilon = 1e-9);
    }
}

#[test]
fn factor_directions() {
    // x y (x − y): directions 0, π/4, π/2.
    let d = real_factor_directions(&[0.0, 1.0, -1.0, 0.0]).unwrap();
    assert_eq!(d.len(), 3);
    assert_relative_eq!(d[0], 0.0, epsilon = 1e-12);
    assert_relative_eq!(d[1], PI / 4.0, epsilon = 1e-12);
    assert_relative_eq!(d[2], PI / 2.0, epsilon = 1e-12);
    assert!(real_factor_directions(&[0.0; 4]).is_none());
}

#[test]
fn surface_equal_to_the_cyclide_is_degenerate() {
    // The cyclide's own x²y² coefficient is Ψ/4 = Ψ_C/6.
    let psi_c = 1.2;
    let c = CanonicalCoeffs::new(0.0, 0.0, 2.0 * psi_c / 3.0, 3.0, 0.0, 0.0, -3.0);
    let set = trace_cyclide_intersection(c, psi_c, 0.5, 32, ExecMode::Parallel).unwrap();
    assert!(set.degenerate && set.polylines.is_empty());
}

#[test]
fn resolution_floor() {
    assert!(matches!(
        trace_cyclide_intersection(generic(), 0.0, 1.0, 8, ExecMode::Parallel),
        Err(Error::ResolutionTooLow(8))
    ));
}

#[test]
fn execution_modes_agree() {
    let a = trace_cyclide_intersection(generic(), 1.0, 1.0, 96, ExecMode::Parallel).unwrap();
    let b = trace_cyclide_intersection(generic(), 1.0, 1.0, 96, ExecMode::Sequential).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn even_data_gives_symmetric_curves(psi in -2.0..2.0f64, a in -3.0..3.0f64, d in -3.0..3.0f64, psi_c in -3.0..3.0f64, n in 8usize..24) {
        let c = CanonicalCoeffs::new(0.0, 0.0, psi, a, 0.0, 0.0, d);
        let res = 2 * n;
        let set = trace_unchecked(c, psi_c, 1.0, res, ExecMode::Parallel).unwrap();
        let pts: Vec<[f64; 2]> = set.polylines.iter().flat_map(|p| p.points.clone()).collect();
        for p in &pts {
            let hit = pts.iter().any(|q| (q[0] + p[0]).abs() + (q[1] + p[1]).abs() < 1e-9);
            prop_assert!(hit);
        }
    }

    #[test]
    fn vertices_lie_on_the_zero_set(t1 in -2.0..2.0f64, t2 in 0.5..2.0f64, psi_c in -3.0..3.0f64) {
        let c = CanonicalCoeffs::new(t1, t2, 0.3, 1.0, 0.2, -0.1, -1.0);
        let set = trace_cyclide_intersection(c, psi_c, 1.0, 48, ExecMode::Parallel).unwrap();
        let f = PencilDifference::new(c, psi_c);
        for p in set.polylines.iter().flat_map(|p| &p.points) {
            prop_assert!(f.eval(p[0], p[1]).abs() < set.tol_iso);
        }
    }
}
