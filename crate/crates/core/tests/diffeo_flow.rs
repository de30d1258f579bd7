use std::f64::consts::PI;

use proptest::prelude::*;

use torus_normal_form::diffeo_transport::{
    b_alpha, characteristics, compute_alpha_tilde, compute_lambda, egorov_check, g_flow,
    simplified_egorov_check, time_derivative_flow, transport_flow, transported_symbol,
    DiffeoPair, Potential,
};
use torus_normal_form::pdo_calculus::{quantize, OperatorMatrix, Symbol};
use torus_normal_form::torus_fourier::{chi, nodes, sobolev_norm_coefficients};
use torus_normal_form::C64;

fn sin_pair(eps: f64, n: usize) -> DiffeoPair {
    DiffeoPair::from_alpha(nodes(n).iter().map(|x| eps * x.sin()).collect(), 0.0).unwrap()
}

fn laplacian() -> Symbol {
    Symbol::multiplier("|xi|^2 chi", 2.0, |_, xi| C64::new(xi * xi * chi(xi), 0.0))
}

/// Mean of `f` over `[0, 2pi)` by the trapezoidal rule on `m` points.
fn fine_mean(m: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).sum::<f64>() / m as f64
}

#[test]
fn lambda_examples() {
    let c = Potential::constant(2.5);
    assert!((compute_lambda(&c, 0.0, 2.0, 32).unwrap() - 2.5).abs() < 1e-14);
    let (a, b) = (1.5, 0.5);
    let v = Potential::new("(a + b cos)^-2", true, move |_, y| (a + b * y.cos()).powi(-2));
    let got = compute_lambda(&v, 0.0, 2.0, 64).unwrap();
    assert!((got - a.powi(-2)).abs() < 1e-13);
    let v = Potential::new("2 + sin", true, |_, y| 2.0 + y.sin());
    let got = compute_lambda(&v, 0.0, 2.0, 64).unwrap();
    let oracle = fine_mean(16 * 64, |y| (2.0 + y.sin()).powf(-0.5)).powi(-2);
    assert!((got - oracle).abs() <= 1e-8 * oracle, "{got} {oracle}");
}

#[test]
fn constant_potential_needs_no_displacement() {
    let at = compute_alpha_tilde(&Potential::constant(3.0), 0.0, 2.0, 32).unwrap();
    assert!(at.alpha_tilde.iter().all(|a| a.abs() < 1e-15));
    let (pair, lambda) = DiffeoPair::from_potential(&Potential::constant(3.0), 0.0, 2.0, 32).unwrap();
    assert!(pair.is_identity());
    assert!((lambda - 3.0).abs() < 1e-14);
}

#[test]
fn small_displacement_inverse_is_first_order_negative() {
    let n = 64;
    let eps = 0.01;
    let pair = DiffeoPair::from_alpha_tilde(nodes(n).iter().map(|y| eps * y.sin()).collect(), 0.0)
        .unwrap();
    for (x, a) in nodes(n).iter().zip(pair.alpha()) {
        assert!((a + eps * x.sin()).abs() <= 2.0 * eps * eps);
    }
    assert!(pair.composition_residual() <= 1e-10);
    assert!(pair.reciprocal_residual() <= 1e-9);
}

#[test]
fn trivial_transport_data() {
    let p = DiffeoPair::identity(32, 0.0).unwrap();
    assert_eq!(b_alpha(&p, 0.6, 1.3).unwrap(), 0.0);
    let (x, xi) = characteristics(&p, 1.0, 0.0, 0.7, 9.0, 10).unwrap();
    assert_eq!((x, xi), (0.7, 9.0));
}

#[test]
fn time_derivative_of_static_flow_vanishes() {
    let n = 32;
    let pair_at = |t: f64| {
        DiffeoPair::from_alpha(nodes(n).iter().map(|x| 0.1 * x.sin()).collect(), t)
    };
    let psi = time_derivative_flow(&pair_at, 0.0, 1e-3, 16).unwrap();
    let phi = transport_flow(&pair_at(0.0).unwrap(), 16).unwrap();
    assert!(psi.max_abs() <= 1e-8 * phi.max_abs());
}

fn growing_pair(n: usize) -> impl Fn(f64) -> torus_normal_form::Result<DiffeoPair> {
    move |t: f64| {
        DiffeoPair::from_alpha(nodes(n).iter().map(|x| 0.05 * (1.0 + t) * x.sin()).collect(), t)
    }
}

#[test]
fn time_derivative_is_first_order() {
    let n = 128;
    let psi = time_derivative_flow(&growing_pair(n), 0.0, 1e-3, 32).unwrap();
    let fit = torus_normal_form::pdo_calculus::estimate_order(&psi).unwrap();
    assert!(fit.slope <= 1.25, "{}", fit.slope);
}

#[test]
fn time_derivative_converges_at_second_order() {
    let n = 32;
    let f = growing_pair(n);
    let at = |h: f64| time_derivative_flow(&f, 0.0, h, 32).unwrap();
    let (a, b, c) = (at(4e-2), at(2e-2), at(1e-2));
    let d1 = a.sub(&b).unwrap().max_abs();
    let d2 = b.sub(&c).unwrap().max_abs();
    let ratio = d1 / d2;
    assert!((3.0..5.0).contains(&ratio), "{d1:e} {d2:e} {ratio}");
}

#[test]
fn group_property_of_generator_flows() {
    let n = 16;
    let zero = OperatorMatrix::zeros(n, 0.0);
    assert_eq!(g_flow(&zero, 1.0).unwrap(), OperatorMatrix::identity(n, 0.0));
    let g = OperatorMatrix::from_modes(n, 0.0, |eta, xi| {
        C64::new((eta + 2 * xi) as f64 * 0.1, (eta - xi) as f64 * 0.05).cos()
    })
    .hermitian_part();
    let prod = g_flow(&g, 1.0).unwrap().matmul(&g_flow(&g, -1.0).unwrap()).unwrap();
    assert!(prod.sub(&OperatorMatrix::identity(n, 0.0)).unwrap().max_abs() < 1e-10);
}

#[test]
fn conjugation_by_identity_flow_is_exact() {
    let n = 64;
    let pair = DiffeoPair::identity(n, 0.0).unwrap();
    let phi = transport_flow(&pair, 8).unwrap();
    let v = quantize(&laplacian(), 0.0, n).unwrap();
    let p0 = transported_symbol(&pair, &laplacian(), 1.0);
    let fit = egorov_check(&phi, &v, &p0, 4, 8).unwrap();
    assert_eq!(fit.slope, f64::NEG_INFINITY);
}

#[test]
fn principal_symbol_of_conjugated_laplacian() {
    let n = 256;
    let pair = sin_pair(0.1, n);
    let phi = transport_flow(&pair, 64).unwrap();
    let v = quantize(&laplacian(), 0.0, n).unwrap();
    let p0 = transported_symbol(&pair, &laplacian(), 1.0);
    let fit = egorov_check(&phi, &v, &p0, 4, 32).unwrap();
    assert!(fit.slope <= 1.25, "{}", fit.slope);
}

#[test]
fn conjugation_by_low_order_generator() {
    let n = 256;
    let eta = 0.5;
    let g = Symbol::new("g", eta, move |_, x, xi| {
        C64::new(0.2 * x.cos() * xi.abs().powf(eta) * chi(xi), 0.0)
    });
    let gm = quantize(&g, 0.0, n).unwrap().hermitian_part();
    let flow = g_flow(&gm, 1.0).unwrap();
    let fit = simplified_egorov_check(&flow, &g, &laplacian(), 0.0, 4, 32).unwrap();
    assert!(fit.slope <= 2.0 - 2.0 * (1.0 - eta) + 0.25, "{}", fit.slope);
}

fn admissible_potential() -> impl Strategy<Value = (f64, f64, f64)> {
    (-0.4..0.4f64, -0.3..0.3f64, 0.0..2.0 * PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn straightening_solves_its_equation(
        (a, b, p) in admissible_potential(),
        m in prop::sample::select(vec![1.5f64, 2.0, 3.0]),
    ) {
        let n = 64;
        let v = Potential::new("exp", true, move |_, y| (a * y.cos() + b * (2.0 * y + p).sin()).exp());
        let at = compute_alpha_tilde(&v, 0.0, m, n).unwrap();
        prop_assert!(at.residual <= 1e-10, "{}", at.residual);
        let (pair, _) = DiffeoPair::from_potential(&v, 0.0, m, n).unwrap();
        prop_assert!(pair.composition_residual() <= 1e-10);
        prop_assert!(pair.reciprocal_residual() <= 1e-9);
    }

    #[test]
    fn transport_flow_is_unitary(
        eps in -0.15..0.15f64,
        coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 32),
    ) {
        let n = 32;
        let pair = DiffeoPair::from_alpha(
            nodes(n).iter().map(|x| eps * (x.sin() + 0.3 * (2.0 * x).cos())).collect(),
            0.0,
        ).unwrap();
        let phi = transport_flow(&pair, 16).unwrap();
        prop_assert!(phi.unitarity_residual() <= 1e-8);
        let mut u: Vec<C64> = coeffs.iter().map(|&(r, i)| C64::new(r, i)).collect();
        u[0] = C64::new(0.0, 0.0);
        let before = sobolev_norm_coefficients(&u, 0.0);
        let after = sobolev_norm_coefficients(&phi.apply(&u).unwrap(), 0.0);
        prop_assert!((after - before).abs() <= 1e-8 * before);
    }
}
