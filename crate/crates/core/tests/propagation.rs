use proptest::prelude::*;

use torus_normal_form::diffeo_transport::Potential;
use torus_normal_form::normal_form::{run_reduction, ProblemSpec, ReductionOptions};
use torus_normal_form::pdo_calculus::{OperatorMatrix, Symbol};
use torus_normal_form::propagator::{
    cross_propagation_error, growth_experiment, interpolation_check, operator_norm,
    operator_norm_block, propagate, propagate_reduced, step_halving, Generator, GrowthOptions,
    ReducedModel, MAX_SAMPLES,
};
use torus_normal_form::torus_fourier::{chi, japanese, mode_index, sobolev_norm, GridFunction};
use torus_normal_form::C64;

fn sup_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn laplacian(n: usize) -> OperatorMatrix {
    OperatorMatrix::diagonal(n, 0.0, |k| C64::new((k * k) as f64, 0.0))
}

/// `|D| + cos(x + t)`, which does not commute with itself at different times.
fn rotating(n: usize) -> Generator {
    Generator::family(move |t| {
        Ok(OperatorMatrix::from_modes(n, t, |eta, xi| match eta - xi {
            0 => C64::new(xi.abs() as f64, 0.0),
            1 => C64::from_polar(0.5, t),
            -1 => C64::from_polar(0.5, -t),
            _ => C64::new(0.0, 0.0),
        }))
    })
}

fn smooth_state(n: usize) -> GridFunction {
    GridFunction::from_fn(n, |x| C64::new(x.cos().exp(), 0.3 * (2.0 * x).sin())).unwrap()
}

#[test]
fn single_mode_picks_up_its_phase() {
    let n = 16;
    let gen = Generator::Constant(laplacian(n));
    let u0 = GridFunction::from_fn(n, |x| C64::from_polar(1.0, 3.0 * x)).unwrap();
    let t1 = 0.7;
    let got = propagate(&gen, &u0, 0.0, t1, 0.05).unwrap();
    let want = GridFunction::from_fn(n, |x| C64::from_polar(1.0, 3.0 * x - 9.0 * t1)).unwrap();
    assert!(sup_diff(got.final_state(), &want) < 1e-12);
}

#[test]
fn multipliers_keep_every_sobolev_norm() {
    let n = 32;
    let gen = Generator::Constant(laplacian(n));
    let tr = propagate(&gen, &smooth_state(n), 0.0, 3.0, 0.1).unwrap();
    for s in [0.0, 1.0, 2.5] {
        let ns = tr.norms(s);
        assert!(ns.iter().all(|v| (v - ns[0]).abs() <= 1e-12 * ns[0]));
    }
}

#[test]
fn backward_integration_undoes_forward() {
    let n = 32;
    let gen = rotating(n);
    let u0 = smooth_state(n);
    let fwd = propagate(&gen, &u0, 0.0, 1.3, 0.01).unwrap();
    let back = propagate(&gen, fwd.final_state(), 1.3, 0.0, 0.01).unwrap();
    assert!(sup_diff(back.final_state(), &u0) < 1e-10);
    assert!(fwd.l2_drift() < 1e-12);
}

#[test]
fn midpoint_stepping_is_second_order() {
    let n = 32;
    let gen = rotating(n);
    let u0 = smooth_state(n);
    let coarse = step_halving(&gen, &u0, 0.0, 1.0, 0.1).unwrap();
    let fine = step_halving(&gen, &u0, 0.0, 1.0, 0.05).unwrap();
    let ratio = coarse / fine;
    assert!((3.0..5.0).contains(&ratio), "{coarse:e} {fine:e} {ratio}");
}

#[test]
fn long_runs_are_subsampled() {
    let n = 8;
    let gen = Generator::Constant(laplacian(n));
    let u0 = GridFunction::from_fn(n, |x| C64::new(x.sin(), 0.0)).unwrap();
    let tr = propagate(&gen, &u0, 0.0, 5.0, 1e-3).unwrap();
    assert!(tr.times.len() <= MAX_SAMPLES + 1);
    assert_eq!(*tr.times.last().unwrap(), 5.0);
    assert_eq!(tr.times.len(), tr.states.len());
    assert!(tr.to_csv(&[1.0]).starts_with("t,l2,hs_1\n"));
}

#[test]
fn flat_reduction_evolves_by_phases_only() {
    let n = 64;
    let spec = ProblemSpec::new(2.0, 1.0, Potential::constant(1.0), Symbol::zero(), true, 1, n).unwrap();
    let res = run_reduction(&spec, &[0.0], &ReductionOptions::default()).unwrap();
    let model = ReducedModel::from_result(&res).unwrap();
    let lk = model.lambda_k(0.0).unwrap()[mode_index(n, 2)];
    assert!((lk - 4.0 * chi(2.0)).abs() < 1e-12);
    let v0 = GridFunction::from_fn(n, |x| C64::from_polar(1.0, 2.0 * x)).unwrap();
    let t1 = 1.5;
    let tr = propagate_reduced(&model, &v0, 0.0, t1, 0.1).unwrap();
    let want = GridFunction::from_fn(n, |x| C64::from_polar(1.0, 2.0 * x - lk * t1)).unwrap();
    assert!(sup_diff(tr.final_state(), &want) < 1e-12);
    let gen = Generator::from_spec(&spec).unwrap();
    assert!(cross_propagation_error(&model, &gen, &smooth_state(n), 0.0, 1.0, 1e-2).unwrap() < 1e-10);
}

#[test]
fn operator_norm_examples() {
    let n = 32;
    let eye = OperatorMatrix::identity(n, 0.0);
    assert!((operator_norm(&eye, 1.5, 1.5).unwrap() - 1.0).abs() < 1e-12);
    let smoothing = OperatorMatrix::diagonal(n, 0.0, |k| C64::new(1.0 / japanese(k as f64), 0.0));
    assert!((operator_norm(&smoothing, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    let lap = laplacian(n);
    let full = operator_norm(&lap, 0.0, 0.0).unwrap();
    assert!((full - 256.0).abs() < 1e-9);
    assert!((operator_norm_block(&lap, 0.0, 0.0, 8).unwrap() - 64.0).abs() < 1e-9);
}

#[test]
fn sobolev_norm_of_a_mode() {
    let u = GridFunction::from_fn(16, |x| C64::from_polar(1.0, 3.0 * x)).unwrap();
    assert!((sobolev_norm(&u, 1.0) - japanese(3.0)).abs() < 1e-12);
}

#[test]
fn reduced_envelope_bounds_the_growth() {
    let n = 64;
    let v = Potential::new("1 + cos/4", true, |_, x| 1.0 + 0.25 * x.cos());
    let w = Symbol::new("0.1 cos x |xi| chi", 1.0, |_, x, xi| {
        C64::new(0.1 * x.cos() * xi.abs() * chi(xi), 0.0)
    });
    let spec = ProblemSpec::new(2.0, 1.0, v, w, true, 2, n).unwrap();
    let res = run_reduction(&spec, &[0.0], &ReductionOptions::default()).unwrap();
    let model = ReducedModel::from_result(&res).unwrap();
    let gen = Generator::from_spec(&spec).unwrap();
    let opts = GrowthOptions {
        s_list: vec![1.0, 2.0],
        t0: 0.0,
        t_final: 5.0,
        dt: 1e-2,
        interpolation_times: vec![1.0, 2.0],
        interpolation_triple: (0.0, 1.0, 2.0),
    };
    let rep = growth_experiment(&gen, &model, &smooth_state(n), &opts).unwrap();
    assert!(rep.passed(), "{}", rep.to_text());
    assert_eq!(rep.interpolation.len(), 2);
    for e in &rep.envelopes {
        assert!(e.constants.c1 >= 1.0 - 1e-9);
        assert!(e.constants.wk_norm_headroom <= e.constants.wk_norm * (1.0 + 1e-12));
    }
}

#[test]
fn interpolation_rejects_unordered_indices() {
    let eye = OperatorMatrix::identity(8, 0.0);
    assert!(interpolation_check(&eye, 1.0, 0.5, 2.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn interpolation_holds_for_any_matrix(
        entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 256),
        s0 in -1.0..0.5f64,
        gap in 0.5..3.0f64,
        theta in 0.1..0.9f64,
    ) {
        let n = 16;
        let a = OperatorMatrix::from_modes(n, 0.0, |eta, xi| {
            let (r, i) = entries[mode_index(n, eta) * n + mode_index(n, xi)];
            C64::new(r, i)
        });
        let s1 = s0 + gap;
        let row = interpolation_check(&a, s0, s0 + theta * gap, s1).unwrap();
        prop_assert!(row.lhs <= row.rhs * (1.0 + 1e-10), "{} {}", row.lhs, row.rhs);
    }
}
