#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use approx::assert_relative_eq;
use cyclide_core::exec::ExecMode;
use cyclide_core::invariants::Tolerances;
use cyclide_core::prescribe::*;
use cyclide_core::Error;
use evalexpr::{eval_number_with_context, ContextWithMutableVariables, HashMapContext, Value};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Partials of polynomial f₁, f₂, κ at (3/10, 2/5) and the four conditions
// there, evaluated symbolically in exact arithmetic.
const GENERAL: Partials = Partials {
    f1: [[1.18830089910089920e+00, 2.38206793206793194e-01, 1.74545454545454559e-01, 8.72727272727272685e-01, 2.18181818181818166e+00], [3.75926739926739917e-01, 1.06483516483516477e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [1.69670329670329662e-01, 4.24175824175824168e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [1.84615384615384626e-01, 4.61538461538461564e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00]],
    f2: [[1.95374313725490190e+00, 1.41333333333333339e-01, 3.53333333333333333e-01, 0.00000000000000000e+00, 0.00000000000000000e+00], [-2.32980392156862753e-01, 5.33333333333333368e-02, 1.33333333333333331e-01, 0.00000000000000000e+00, 0.00000000000000000e+00], [9.90849673202614384e-02, 1.77777777777777785e-01, 4.44444444444444420e-01, 0.00000000000000000e+00, 0.00000000000000000e+00], [4.23529411764705876e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [1.41176470588235303e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00]],
    kappa: [[7.66000000000000014e-01, 1.60000000000000003e-01, 2.99999999999999989e-01, 7.50000000000000000e-01, 0.00000000000000000e+00], [2.53333333333333355e-01, 3.33333333333333315e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [4.00000000000000022e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00]],
};

const GENERAL_VALUES: [f64; 4] = [3.87117023655525583e-01, -2.10171129928605538e+00, 3.19176235617177451e-01, -1.58683011502717286e+00];

const CONSTANT: Partials = Partials {
    f1: [[1.18830089910089920e+00, 2.38206793206793194e-01, 1.74545454545454559e-01, 8.72727272727272685e-01, 2.18181818181818166e+00], [3.75926739926739917e-01, 1.06483516483516477e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [1.69670329670329662e-01, 4.24175824175824168e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [1.84615384615384626e-01, 4.61538461538461564e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00]],
    f2: [[1.95374313725490190e+00, 1.41333333333333339e-01, 3.53333333333333333e-01, 0.00000000000000000e+00, 0.00000000000000000e+00], [-2.32980392156862753e-01, 5.33333333333333368e-02, 1.33333333333333331e-01, 0.00000000000000000e+00, 0.00000000000000000e+00], [9.90849673202614384e-02, 1.77777777777777785e-01, 4.44444444444444420e-01, 0.00000000000000000e+00, 0.00000000000000000e+00], [4.23529411764705876e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [1.41176470588235303e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00]],
    kappa: [[6.99999999999999956e-01, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00], [0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00, 0.00000000000000000e+00]],
};

const CONSTANT_VALUES: [f64; 4] = [3.18148251098969270e-01, -1.72519968730869278e+00, 3.10062764654490175e-01, -1.46798542976006474e+00];

const EQ104: &str = "2.0/(F1^6.0*F2^6.0)*(-15.0*F2^6.0*a01*a10^3.0-F1^4.0*F2^2.0*a01*(2.0*F2^4.0*a10+3.0*a01*b01*b10+F2*(2.0*k01*a01^2.0-3.0*a02*b10))-F1^6.0*(2.0*F2^5.0*(k01*a01+k*a02)+F2^3.0*(3.0*k02*a02+a01*k03+3.0*k01*a03+k*a04)+2.0*F2^4.0*b01*b10+15.0*b01^3.0*b10+5.0*F2*b01*(3.0*k01*a01*b01+3.0*k*b01*a02-2.0*b02*b10)-F2^2.0*(12.0*k01*b01*a02+a01*(6.0*b01*k02+4.0*k01*b02)+k*(4.0*a02*b02+6.0*b01*a03)-b03*b10))+F1^5.0*F2*(F2*a01^2.0*(15.0*k01*b01-4.0*F2*k02)-11.0*F2^2.0*k01*a01*a02-3.0*k*F2^2.0*a02^2.0+a01*(8.0*F2^4.0+18.0*b01^2.0-5.0*F2*b02)*b10+F2*(-21.0*b01*a02+5.0*F2*a03)*b10+2.0*F2^5.0*a11)+F1*F2^5.0*a10*(15.0*F2*a10*a11+2.0*a01*(9.0*a10*b10+5.0*F2*a20))-F1^2.0*F2^4.0*(3.0*a01*a10*b10^2.0+F2*(-12.0*a01^2.0*k10*a10+27.0*a10*b10*a11+a01*(5.0*b10*a20-6.0*a10*b20))+F2^2.0*(4.0*a11*a20+6.0*a10*a21+a01*a30))+F1^3.0*F2^4.0*(6.0*b10^2.0*a11-2.0*a01^2.0*(2.0*k10*b10+F2*k20)+6.0*F2*b10*a21-a01*(3.0*b10*b20+F2*(10.0*k10*a11+b30))+F2*(-6.0*k*a11^2.0-3.0*a11*b20+F2*a31)))";

const EQ1004: &str = "-2.0/(F1^6.0*F2^6.0)*(k*F1^6.0*(-2.0*F2^4.0*a01*b01-15.0*a01*b01^3.0+2.0*F2^5.0*a02+5.0*F2*b01*(3.0*b01*a02+2.0*a01*b02)-F2^2.0*(4.0*a02*b02+6.0*b01*a03+a01*b03)+F2^3.0*a04)+15.0*F2^6.0*a01*a10^3.0+F1^4.0*F2^2.0*a01*(-3.0*k*a01^2.0*b01+3.0*k*F2*a01*a02+2.0*F2^4.0*a10)+F1^5.0*F2*(8.0*k*F2^4.0*a01^2.0+18.0*k*a01^2.0*b01^2.0-k*F2*a01*(21.0*b01*a02+5.0*a01*b02)+k*F2^2.0*(3.0*a02^2.0+5.0*a01*a03)-2.0*F2^5.0*a11)+F1*F2^5.0*a10*(30.0*k*a01^2.0*a10-15.0*F2*a10*a11+2.0*a01*(6.0*a10*b10-5.0*F2*a20))+F1^2.0*F2^4.0*(24.0*k^2.0*a01^3.0*a10+a01^2.0*(30.0*k*a10*b10-8.0*k*F2*a20)+F2*(4.0*F2*a11*a20+a10*(-9.0*b10*a11+6.0*F2*a21))+a01*(a10*(9.0*b10^2.0-6.0*F2*(6.0*k*a11+b20))+F2*(-3.0*b10*a20+F2*a30)))+F1^3.0*F2^3.0*(8.0*k^3.0*a01^4.0+20.0*k^2.0*a01^3.0*b10-8.0*k*a01^2.0*(-2.0*b10^2.0+F2*(3.0*k*a11+b20))+a01*(4.0*b10^3.0-F2*b10*(22.0*k*a11+5.0*b20)+F2^2.0*(8.0*k*a21+b30))+F2*(-4.0*b10^2.0*a11+2.0*F2*b10*a21+F2*(6.0*k*a11^2.0+3.0*a11*b20-F2*a31))))";

const EQ103: &str = "2.0*(-a01^2.0/F1^2.0+a02/F1+(b10^2.0+F2*(a01*k10+k*a11))/F2^2.0)";
const EQ1003: &str = "2.0*a02/F1+2.0*k*(-a01*b10+F2*a11)/F2^2.0-2.0*a01^2.0/F1^2.0";

fn string_form(expr: &str, p: &Partials) -> f64 {
    let mut ctx = HashMapContext::new();
    for i in 0..5 {
        for j in 0..5 - i {
            ctx.set_value(format!("a{i}{j}"), Value::Float(p.f1[i][j])).unwrap();
            ctx.set_value(format!("b{i}{j}"), Value::Float(p.f2[i][j])).unwrap();
            ctx.set_value(format!("k{i}{j}"), Value::Float(p.kappa[i][j])).unwrap();
        }
    }
    ctx.set_value("F1".into(), Value::Float(p.f1[0][0])).unwrap();
    ctx.set_value("F2".into(), Value::Float(p.f2[0][0])).unwrap();
    ctx.set_value("k".into(), Value::Float(p.kappa[0][0])).unwrap();
    eval_number_with_context(expr, &ctx).unwrap()
}

fn random_partials(rng: &mut ChaCha8Rng, constant_kappa: bool) -> Partials {
    let mut p = Partials::default();
    for i in 0..5 {
        for j in 0..5 - i {
            p.f1[i][j] = rng.gen_range(-2.0..2.0);
            p.f2[i][j] = rng.gen_range(-2.0..2.0);
            p.kappa[i][j] = if constant_kappa && i + j > 0 { 0.0 } else { rng.gen_range(-2.0..2.0) };
        }
    }
    p.f1[0][0] = rng.gen_range(0.5..2.0);
    p.f2[0][0] = rng.gen_range(0.5..2.0);
    p
}

fn all_four(p: &Partials) -> [f64; 4] {
    [eq103(p), eq104(p), eq1003(p), eq1004(p)]
}

#[test]
fn hand_coded_conditions_match_string_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..200 {
        let p = random_partials(&mut rng, k % 2 == 0);
        let strings = [string_form(EQ103, &p), string_form(EQ104, &p), string_form(EQ1003, &p), string_form(EQ1004, &p)];
        for (h, s) in all_four(&p).iter().zip(strings) {
            assert_relative_eq!(*h, s, max_relative = 1e-10, epsilon = 1e-9);
        }
    }
}

#[test]
fn conditions_match_symbolic_values() {
    for (p, want) in [(GENERAL, GENERAL_VALUES), (CONSTANT, CONSTANT_VALUES)] {
        for (got, want) in all_four(&p).iter().zip(want) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
    }
}

#[test]
fn constant_kappa_forms_agree_under_the_linear_condition() {
    // With κ constant and ∂₁f₂ = −κ∂₂f₁ differentiated, the general forms
    // reduce to the constant-κ forms.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let mut p = random_partials(&mut rng, true);
        let k = p.kappa[0][0];
        for i in 0..4 {
            for j in 0..4 - i {
                p.f2[i + 1][j] = -k * p.f1[i][j + 1];
            }
        }
        assert_relative_eq!(eq103(&p), eq1003(&p), max_relative = 1e-10, epsilon = 1e-10);
        assert_relative_eq!(eq104(&p), eq1004(&p), max_relative = 1e-9, epsilon = 1e-8);
    }
}

fn unit(n: usize) -> GridShape {
    GridShape::new(n, n, [0.0, 0.0], 1.0, 1.0).unwrap()
}

fn orders(r: &[f64]) -> Vec<f64> {
    r.windows(2).map(|w| convergence_order(w[0], w[1])).collect()
}

const LEVELS: [usize; 3] = [33, 65, 129];

#[test]
fn f1_constant_along_columns_when_f2_is_constant() {
    let s = unit(9);
    let kappa = s.sample(|x, y| 1.0 + x * y);
    let boundary: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
    let f1 = solve_f1(&s, &vec![1.0; s.len()], &kappa, &boundary, ExecMode::Parallel).unwrap();
    for i in 0..9 {
        for j in 0..9 {
            assert_eq!(f1[s.idx(i, j)], boundary[i]);
        }
    }
}

#[test]
fn f1_exact_on_linear_data() {
    let s = unit(11);
    let f2 = s.sample(|x, _| 1.0 + x);
    let f1 = solve_f1(&s, &f2, &vec![1.0; s.len()], &vec![2.0; 11], ExecMode::Sequential).unwrap();
    for i in 0..11 {
        for j in 0..11 {
            assert_relative_eq!(f1[s.idx(i, j)], 2.0 - s.x2(j), epsilon = 1e-14);
        }
    }
}

#[test]
fn f1_reproduces_helcat_data_at_second_order() {
    let h = HelcatFields { alpha_h: PI / 4.0 };
    let errs: Vec<f64> = LEVELS
        .iter()
        .map(|&n| {
            let s = unit(n);
            let inp = h.inputs(&s);
            let f1 = solve_f1(&s, &inp.f2, &inp.kappa, &inp.f1_boundary, ExecMode::Parallel).unwrap();
            let exact = s.sample(|x, y| h.f(x, y));
            f1.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .collect();
    assert!(orders(&errs).iter().all(|o| *o > 1.8), "{errs:?}");
}

#[test]
fn f1_errors() {
    let s = unit(5);
    let f2 = s.sample(|x, _| 1.0 + 10.0 * x);
    let mut kappa = vec![1.0; s.len()];
    let r = solve_f1(&s, &f2, &kappa, &vec![0.5; 5], ExecMode::Parallel);
    assert!(matches!(r, Err(Error::NonPositiveResult { column: 0 })));
    kappa[7] = 0.0;
    assert!(matches!(solve_f1(&s, &f2, &kappa, &vec![0.5; 5], ExecMode::Parallel), Err(Error::KappaZero)));
    assert!(solve_f1(&s, &f2, &vec![1.0; 25], &vec![0.0; 5], ExecMode::Parallel).is_err());
}

#[test]
fn thetas_on_simple_data() {
    let s = unit(9);
    let one = vec![1.0; s.len()];
    let th = thetas_from_f(&s, &vec![3.0; s.len()], &vec![2.0; s.len()], &one);
    assert!(th.theta1.iter().chain(&th.theta2).all(|t| *t == 0.0));

    let s = unit(129);
    let f1 = s.sample(|_, y| (-y).exp());
    let th = thetas_from_f(&s, &f1, &vec![1.0; s.len()], &vec![1.0; s.len()]);
    for i in 1..128 {
        for j in 1..128 {
            assert!((th.theta2[s.idx(i, j)] - 2.0).abs() < 1e-4);
        }
    }
}

#[test]
fn thetas_reproduce_helcat_data_at_second_order() {
    let h = HelcatFields { alpha_h: PI / 6.0 };
    let mut errs = Vec::new();
    let mut gaps = Vec::new();
    for n in LEVELS {
        let s = unit(n);
        let exact = h.grid(s);
        let th = thetas_from_f(&s, exact.f1.as_ref().unwrap(), exact.f2.as_ref().unwrap(), exact.kappa.as_ref().unwrap());
        let e = th.theta1.iter().zip(exact.theta1.as_ref().unwrap()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        errs.push(e);
        gaps.push(th.max_gap);
    }
    assert!(orders(&errs).iter().all(|o| *o > 1.8), "{errs:?}");
    assert!(orders(&gaps).iter().all(|o| *o > 1.8), "{gaps:?}");
}

fn generic_grid(n: usize) -> FieldGrid {
    let s = unit(n);
    let mut g = FieldGrid::new(s);
    g.f1 = Some(s.sample(|x, y| 1.0 + 0.2 * x * y));
    g.f2 = Some(s.sample(|x, _| 1.0 + 0.1 * x * x));
    g.theta1 = Some(s.sample(|x, y| y.sin() + x));
    g.theta2 = Some(s.sample(|x, y| x + x.cos() + 0.3 * y * y));
    g
}

#[test]
fn grid_psi_matches_symbolic_evaluation() {
    // Exact values of the Ψ-from-θ formula for the fields of generic_grid.
    let oracle = [((0.5, 0.5), -8.2722667362200313), ((0.25, 0.75), -7.3585880282717582)];
    let tol = Tolerances::default();
    let mut errs = [Vec::new(), Vec::new()];
    for n in LEVELS {
        let g = generic_grid(n);
        let psi = psi_from_grid(&g, tol.gen, ExecMode::Parallel).unwrap();
        for (k, ((x, y), want)) in oracle.iter().enumerate() {
            let (i, j) = ((x * (n - 1) as f64) as usize, (y * (n - 1) as f64) as usize);
            errs[k].push((psi[g.shape.idx(i, j)] - want).abs());
        }
    }
    for e in &errs {
        assert!(e[2] < 1e-3, "{e:?}");
        assert!(orders(e).iter().all(|o| *o > 1.8), "{e:?}");
    }
}

#[test]
fn grid_psi_masks_non_generic_data() {
    let tol = Tolerances::default();
    let s = unit(33);
    let mut g = FieldGrid::new(s);
    g.f1 = Some(vec![1.0; s.len()]);
    g.f2 = Some(vec![2.0; s.len()]);
    g.theta1 = Some(vec![0.0; s.len()]);
    g.theta2 = Some(vec![0.0; s.len()]);
    assert!(psi_from_grid(&g, tol.gen, ExecMode::Parallel).unwrap().iter().all(|p| p.is_nan()));
    for alpha_h in [0.0, PI / 6.0, PI / 4.0] {
        let g = HelcatFields { alpha_h }.grid(s);
        assert!(psi_from_grid(&g, tol.gen, ExecMode::Parallel).unwrap().iter().all(|p| p.is_nan()));
    }
}

fn max_norm(r: &ResidualReport, eq: &str) -> f64 {
    r.get(eq).unwrap().max_norm
}

#[test]
fn structural_residuals_vanish_on_cyclide_data() {
    let s = unit(9);
    let mut g = FieldGrid::new(s);
    for f in [&mut g.f1, &mut g.f2] {
        *f = Some(vec![1.5; s.len()]);
    }
    for f in [&mut g.theta1, &mut g.theta2, &mut g.b, &mut g.c] {
        *f = Some(vec![0.0; s.len()]);
    }
    g.psi = Some(vec![-2.0; s.len()]);
    let r = structural_residuals(&g, ExecMode::Parallel).unwrap();
    // Constant data has the residual of 403 and 404 only through θ = 0.
    for e in &r.equations {
        assert_eq!(e.max_norm, 0.0, "{}", e.equation);
    }
    assert_eq!(r.order, 2);
    g.psi = None;
    assert!(matches!(structural_residuals(&g, ExecMode::Parallel), Err(Error::MissingField(f)) if f == "psi"));
}

#[test]
fn structural_residuals_converge_on_helcat_data() {
    for alpha_h in [0.0, PI / 4.0] {
        let h = HelcatFields { alpha_h };
        let reports: Vec<ResidualReport> = LEVELS.iter().map(|&n| structural_residuals(&h.grid(unit(n)), ExecMode::Parallel).unwrap()).collect();
        for eq in ["401", "402", "403", "404"] {
            let r: Vec<f64> = reports.iter().map(|r| max_norm(r, eq)).collect();
            assert!(orders(&r).iter().all(|o| *o > 1.8), "{alpha_h} {eq} {r:?}");
        }
    }
}

#[test]
fn perturbed_psi_shows_in_the_last_two_equations() {
    let g = HelcatFields { alpha_h: PI / 4.0 }.grid(unit(65));
    let mut p = g.clone();
    p.psi.as_mut().unwrap().iter_mut().for_each(|x| *x += 0.1);
    let (a, b) = (structural_residuals(&g, ExecMode::Parallel).unwrap(), structural_residuals(&p, ExecMode::Parallel).unwrap());
    for eq in ["401", "402"] {
        assert_eq!(max_norm(&a, eq), max_norm(&b, eq));
    }
    for eq in ["403", "404"] {
        assert!(max_norm(&b, eq) > 0.01 && max_norm(&b, eq) > 20.0 * max_norm(&a, eq));
    }
}

#[test]
fn integrability_residuals_on_simple_and_small_grids() {
    let s = unit(7);
    let mut g = FieldGrid::new(s);
    g.f1 = Some(vec![1.0; s.len()]);
    g.f2 = Some(vec![1.0; s.len()]);
    assert!(matches!(integrability_residuals(&g, ExecMode::Parallel), Err(Error::MissingField(_))));
    g.kappa = Some(vec![1.0; s.len()]);
    let r = integrability_residuals(&g, ExecMode::Parallel).unwrap();
    assert_eq!(r.equations[0].equation, "1003");
    assert!(r.equations.iter().all(|e| e.max_norm == 0.0));
    g.kappa = Some(s.sample(|x, y| 1.0 + x * y));
    let r = integrability_residuals(&g, ExecMode::Parallel).unwrap();
    assert_eq!(r.equations[1].equation, "104");
    assert!(r.equations.iter().all(|e| e.max_norm == 0.0));

    let s = GridShape::new(4, 9, [0.0, 0.0], 1.0, 1.0).unwrap();
    let mut g = FieldGrid::new(s);
    for f in [&mut g.f1, &mut g.f2, &mut g.kappa] {
        *f = Some(vec![1.0; s.len()]);
    }
    assert!(matches!(integrability_residuals(&g, ExecMode::Parallel), Err(Error::MarginTooSmall { needed: 5 })));
}

#[test]
fn integrability_on_helcat_data() {
    // The fourth-order condition holds on every member; the second-order
    // constant-κ form holds only on the helicoid.
    for alpha_h in [0.0, PI / 6.0, PI / 4.0] {
        let h = HelcatFields { alpha_h };
        let reports: Vec<ResidualReport> = LEVELS.iter().map(|&n| integrability_residuals(&h.grid(unit(n)), ExecMode::Parallel).unwrap()).collect();
        let r1004: Vec<f64> = reports.iter().map(|r| max_norm(r, "1004")).collect();
        assert!(orders(&r1004).iter().all(|o| *o > 1.8), "{r1004:?}");
        let r1003: Vec<f64> = reports.iter().map(|r| max_norm(r, "1003")).collect();
        if alpha_h == 0.0 {
            assert!(orders(&r1003).iter().all(|o| *o > 1.8), "{r1003:?}");
        } else {
            assert!(r1003[2] > 0.5, "{r1003:?}");
        }
    }
}

#[test]
fn helicoid_prescription_is_realizable() {
    let tol = Tolerances::default();
    let s = unit(33);
    let out = prescribe(&s, &HelcatFields { alpha_h: 0.0 }.inputs(&s), &tol, ExecMode::Parallel).unwrap();
    assert!(out.realizable);
    let g = &out.prescription.grid;
    let (t1, t2) = (g.theta1.as_ref().unwrap(), g.theta2.as_ref().unwrap());
    for (a, b) in t1.iter().zip(t2) {
        if b.abs() > 1e-9 {
            assert_relative_eq!((a / b).cbrt().atan(), PI / 4.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn perturbed_boundary_is_not_realizable() {
    let tol = Tolerances::default();
    for n in [33, 65] {
        let s = unit(n);
        let mut inp = HelcatFields { alpha_h: 0.0 }.inputs(&s);
        for i in 0..n {
            inp.f1_boundary[i] *= 1.0 + 0.1 * (2.0 * PI * s.x1(i)).sin();
        }
        let out = prescribe(&s, &inp, &tol, ExecMode::Parallel).unwrap();
        assert!(!out.realizable);
        let v = out.verdicts.iter().find(|v| v.equation == "1004").unwrap();
        assert!(v.max_norm > 10.0 * v.tol_real);
    }
}

#[test]
fn adversarial_kappa_returns_a_report() {
    let tol = Tolerances::default();
    let s = unit(33);
    let inp = PrescribeInputs { kappa: s.sample(|x, y| 1.0 + x * y), f2: vec![1.0; s.len()], f1_boundary: vec![1.0; 33] };
    let out = prescribe(&s, &inp, &tol, ExecMode::Parallel).unwrap();
    assert_eq!(out.prescription.integrability.equations[0].equation, "103");
    assert!(out.prescription.report().equations.iter().all(|e| e.cells == 0 || e.max_norm >= 0.0));
}

#[test]
fn scaled_helicoid_data_leaves_the_fourth_order_condition() {
    // f → λf scales θ by 1/λ, but 403 and 404 carry the constants ±2, so
    // the fourth-order condition is not homogeneous: for λ = 2 its residual
    // tends to 3 instead of 0.
    let tol = Tolerances::default();
    let s = unit(65);
    let mut inp = HelcatFields { alpha_h: 0.0 }.inputs(&s);
    inp.f2.iter_mut().for_each(|x| *x *= 2.0);
    inp.f1_boundary.iter_mut().for_each(|x| *x *= 2.0);
    let p = run_pipeline(&s, &inp, &tol, ExecMode::Parallel).unwrap();
    assert!((max_norm(&p.integrability, "1004") - 3.0).abs() < 1e-2);
    assert!(max_norm(&p.integrability, "1003") < 1e-3);
}

#[test]
fn execution_modes_agree() {
    let tol = Tolerances::default();
    let s = unit(33);
    let inp = HelcatFields { alpha_h: PI / 3.0 }.inputs(&s);
    let a = prescribe(&s, &inp, &tol, ExecMode::Parallel).unwrap();
    let b = prescribe(&s, &inp, &tol, ExecMode::Sequential).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}

#[test]
fn csv_round_trip() {
    let g = generic_grid(9);
    let mut g = g;
    g.psi = Some(psi_from_grid(&g, 1e-5, ExecMode::Parallel).unwrap());
    let mut buf = Vec::new();
    write_grid_csv(&g, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("x1,x2,f1,f2,theta1,theta2,psi\n0,0,1,1,0,1,\n"));
    let back = read_grid_csv(buf.as_slice()).unwrap();
    assert_eq!(back.shape.n1, 9);
    for name in ["f1", "f2", "theta1", "theta2"] {
        for (a, b) in back.field(name).unwrap().iter().zip(g.field(name).unwrap()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-11);
        }
    }
    let k = back.kappa.unwrap();
    assert_relative_eq!(k[g.shape.idx(3, 4)], g.theta1.as_ref().unwrap()[g.shape.idx(3, 4)] / g.theta2.as_ref().unwrap()[g.shape.idx(3, 4)], max_relative = 1e-11);
    assert!(read_grid_csv("x1,x2,f1\n0,0,1\n1,0,1\n".as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn angle_round_trip(k0 in 0.5..3.0f64, k1 in -0.2..0.2f64, bump in 0.0..0.3f64) {
        // θ₁/θ₂ = κ exactly, so tan³α recovers κ wherever θ₂ ≠ 0.
        let s = unit(17);
        let kappa = s.sample(|x, y| k0 + k1 * x * y);
        let inp = PrescribeInputs { kappa: kappa.clone(), f2: s.sample(|x, y| 1.0 + bump * x * (1.0 + y)), f1_boundary: vec![3.0; 17] };
        let f1 = solve_f1(&s, &inp.f2, &inp.kappa, &inp.f1_boundary, ExecMode::Parallel).unwrap();
        let th = thetas_from_f(&s, &f1, &inp.f2, &kappa);
        for k in 0..s.len() {
            if th.theta2[k].abs() > 1e-12 {
                let alpha = (th.theta1[k] / th.theta2[k]).cbrt().atan();
                prop_assert!((alpha.tan().powi(3) - kappa[k]).abs() <= 1e-12 * kappa[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn scaling_keeps_kappa_and_scales_thetas(alpha_h in 0.0..1.2f64, lambda in 0.3..3.0f64) {
        let tol = Tolerances::default();
        let s = unit(17);
        let inp = HelcatFields { alpha_h }.inputs(&s);
        let mut scaled = inp.clone();
        scaled.f2.iter_mut().for_each(|x| *x *= lambda);
        scaled.f1_boundary.iter_mut().for_each(|x| *x *= lambda);
        let a = run_pipeline(&s, &inp, &tol, ExecMode::Parallel).unwrap();
        let b = run_pipeline(&s, &scaled, &tol, ExecMode::Parallel).unwrap();
        let (ga, gb) = (&a.grid, &b.grid);
        for k in 0..s.len() {
            prop_assert!((gb.f1.as_ref().unwrap()[k] - lambda * ga.f1.as_ref().unwrap()[k]).abs() < 1e-12 * lambda);
            prop_assert!((gb.theta2.as_ref().unwrap()[k] * lambda - ga.theta2.as_ref().unwrap()[k]).abs() < 1e-10);
            let (ka, kb) = (ga.theta1.as_ref().unwrap()[k] / ga.theta2.as_ref().unwrap()[k], gb.theta1.as_ref().unwrap()[k] / gb.theta2.as_ref().unwrap()[k]);
            prop_assert!(ka.is_nan() || (ka - kb).abs() < 1e-12);
        }
        prop_assert!((max_norm(&a.integrability, "1003") - max_norm(&b.integrability, "1003")).abs() < 1e-9);
    }

    #[test]
    fn theta_expressions_agree_within_the_envelope(alpha_h in 0.0..1.3f64) {
        // Both θ₂ expressions differ by O(h²) on data satisfying the linear
        // condition to O(h²).
        let gaps: Vec<f64> = [17usize, 33].iter().map(|&n| {
            let s = unit(n);
            let inp = HelcatFields { alpha_h }.inputs(&s);
            let f1 = solve_f1(&s, &inp.f2, &inp.kappa, &inp.f1_boundary, ExecMode::Parallel).unwrap();
            thetas_from_f(&s, &f1, &inp.f2, &inp.kappa).max_gap
        }).collect();
        prop_assert!(gaps[0] < 1.0 / 16.0 / 16.0 * 4.0);
        prop_assert!(convergence_order(gaps[0], gaps[1]) > 1.8);
    }
}
