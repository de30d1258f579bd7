use proptest::prelude::*;

use torus_normal_form::diffeo_transport::Potential;
use torus_normal_form::normal_form::{
    homological_residual, homological_solve_symbol, pushforward, reduce_at, reduce_highest_order,
    run_reduction, EvolutionSign, ProblemSpec, ReductionOptions,
};
use torus_normal_form::pdo_calculus::{estimate_order_window, exp_i_hermitian, OperatorMatrix, Symbol};
use torus_normal_form::propagator::ReducedModel;
use torus_normal_form::torus_fourier::{chi, index_mode};
use torus_normal_form::{Error, C64};

fn w_cos() -> Symbol {
    Symbol::new("0.1 cos x |xi| chi", 1.0, |_, x, xi| {
        C64::new(0.1 * x.cos() * xi.abs() * chi(xi), 0.0)
    })
}

fn ledger_spec(n: usize, k: usize) -> ProblemSpec {
    let v = Potential::new("1 + cos/4", true, |_, x| 1.0 + 0.25 * x.cos());
    ProblemSpec::new(2.0, 1.0, v, w_cos(), true, k, n).unwrap()
}

fn flat_spec(n: usize) -> ProblemSpec {
    ProblemSpec::new(2.0, 1.0, Potential::constant(1.0), Symbol::zero(), true, 2, n).unwrap()
}

fn travelling_spec(n: usize, comoving: bool) -> ProblemSpec {
    let v = Potential::new("1 + cos(x - t)/2", false, |t, x| 1.0 + 0.5 * (x - t).cos());
    let spec = ProblemSpec::new(2.0, 1.0, v, Symbol::zero(), true, 1, n).unwrap();
    if comoving {
        spec.with_comoving_speed(1.0).unwrap()
    } else {
        spec
    }
}

fn dispersion(n: usize, lambda: f64) -> OperatorMatrix {
    OperatorMatrix::diagonal(n, 0.0, |k| {
        let x = k as f64;
        C64::new(lambda * x * x * chi(x), 0.0)
    })
}

#[test]
fn flat_problem_is_already_reduced() {
    let n = 64;
    let smp = reduce_at(&flat_spec(n), 0.0, &ReductionOptions::default()).unwrap();
    let eye = OperatorMatrix::identity(n, 0.0);
    assert!(smp.tk().unwrap().sub(&eye).unwrap().max_abs() < 1e-12);
    assert!((smp.lambda - 1.0).abs() < 1e-14);
    for (i, l) in smp.lambda_k.iter().enumerate() {
        let x = index_mode(n, i) as f64;
        assert!((l - x * x * chi(x)).abs() < 1e-10, "{x}: {l}");
    }
    assert!(smp.w_k.max_abs() < 1e-10);
}

#[test]
fn straightening_leaves_lower_order_remainder() {
    let n = 128;
    let v = Potential::new("(1 + cos/2)^-2", true, |_, x| (1.0 + 0.5 * x.cos()).powi(-2));
    let spec = ProblemSpec::new(2.0, 1.0, v, Symbol::zero(), true, 1, n).unwrap();
    let state = reduce_highest_order(&spec, 0.0, &ReductionOptions::default()).unwrap();
    let rest = state.operator().sub(&dispersion(n, state.lambda())).unwrap();
    let fit = estimate_order_window(&rest, 4, 16, 0.0).unwrap();
    assert!(fit.slope <= 1.25, "{}", fit.slope);
}

#[test]
fn each_step_folds_the_diagonal_into_mu() {
    let n = 64;
    let mut state = reduce_highest_order(&ledger_spec(n, 1), 0.0, &ReductionOptions::default()).unwrap();
    state.reduce_step().unwrap();
    let first = &state.steps()[0];
    let diag = first.w.diagonal_entries();
    for ((after, before), d) in state.mu().iter().zip(&first.mu).zip(&diag) {
        assert!((after - before - d.re).abs() < 1e-13);
        assert!(d.im.abs() < 1e-10);
    }
}

#[test]
fn second_remainder_drops_one_order() {
    let n = 128;
    let smp = reduce_at(&ledger_spec(n, 1), 0.0, &ReductionOptions::default()).unwrap();
    let w2 = &smp.steps[1];
    assert_eq!(w2.n, 2);
    assert!(w2.fitted_order_w <= 0.25, "{}", w2.fitted_order_w);
    assert!(smp.steps.windows(2).all(|s| s[1].fitted_order_w < s[0].fitted_order_w));
}

#[test]
fn conjugation_identity_holds() {
    let smp = reduce_at(&ledger_spec(64, 2), 0.0, &ReductionOptions::default()).unwrap();
    assert!(smp.conjugation_residual <= 1e-8, "{}", smp.conjugation_residual);
    assert!(smp.tk().unwrap().unitarity_residual() <= 1e-10);
}

#[test]
fn travelling_shortcut_matches_the_time_stencil() {
    let n = 64;
    let opts = ReductionOptions::default();
    let a = reduce_at(&travelling_spec(n, true), 0.0, &opts).unwrap();
    let b = reduce_at(&travelling_spec(n, false), 0.0, &opts).unwrap();
    let scale = a.lambda_k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dl = a
        .lambda_k
        .iter()
        .zip(&b.lambda_k)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(dl <= 1e-6 * scale, "{dl:e}");
    let dw = a.w_k.block_max_diff(&b.w_k, (n / 4) as i64).unwrap();
    assert!(dw <= 1e-5 * scale, "{dw:e}");
}

#[test]
fn pushforward_of_rotation_family() {
    let n = 16;
    let g = OperatorMatrix::from_modes(n, 0.0, |eta, xi| {
        C64::new(0.2 / (1.0 + (eta - xi).abs() as f64), 0.05 * (eta + xi) as f64)
    })
    .hermitian_part();
    let h = 1e-3;
    let phis: Vec<OperatorMatrix> = (0..3).map(|j| exp_i_hermitian(&g, j as f64 * h).unwrap()).collect();
    let xs = vec![OperatorMatrix::zeros(n, 0.0); 3];
    let pf = pushforward(&xs, &phis, h).unwrap();
    assert_eq!(pf.one_sided, vec![true, false, true]);
    let expect = g.scale(C64::new(0.0, -1.0));
    for v in &pf.values {
        assert!(v.sub(&expect).unwrap().max_abs() <= 1e-4 * g.max_abs());
    }
}

#[test]
fn stall_reports_the_ledger_so_far() {
    let opts = ReductionOptions {
        slack: -5.0,
        ..ReductionOptions::default()
    };
    match run_reduction(&ledger_spec(64, 1), &[0.0], &opts) {
        Err(Error::ReductionStall { step, ledger, fitted, bound }) => {
            assert_eq!(step, 1);
            assert_eq!(ledger.len(), 1);
            assert!(fitted > bound);
            assert_eq!(ledger[0].step, 1);
        }
        other => panic!("expected a stall, got {other:?}"),
    }
}

#[test]
fn reduced_model_needs_minus_orientation() {
    let opts = ReductionOptions {
        sign: EvolutionSign::Plus,
        ..ReductionOptions::default()
    };
    let res = run_reduction(&flat_spec(64), &[0.0], &opts).unwrap();
    assert!(res.summary_json().contains("\"plus\""));
    assert!(matches!(ReducedModel::from_result(&res), Err(Error::Contract(_))));
}

#[test]
fn samples_keep_their_order() {
    let v = Potential::new("1 + sin(x + t)/4", false, |t, x| 1.0 + 0.25 * (x + t).sin());
    let spec = ProblemSpec::new(2.0, 1.0, v, Symbol::zero(), true, 1, 64).unwrap();
    let times = [0.6, 0.0, 0.3];
    let res = run_reduction(&spec, &times, &ReductionOptions::default()).unwrap();
    let got: Vec<f64> = res.samples.iter().map(|s| s.t).collect();
    assert_eq!(got, times);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn homological_equation_is_solved(
        terms in prop::collection::vec((1i64..6, -1.0..1.0f64, 0.0..6.3f64), 1..4),
        lambda in 0.5..2.0f64,
        m in prop::sample::select(vec![2.0f64, 3.0]),
    ) {
        let terms2 = terms.clone();
        let w = Symbol::new("trig |xi| chi", 1.0, move |_, x, xi| {
            let a: f64 = terms2.iter().map(|&(k, c, p)| c * (k as f64 * x + p).cos()).sum();
            C64::new(a * xi.abs() * chi(xi), 0.0)
        });
        let sol = homological_solve_symbol(&w, 0.0, lambda, m, 64).unwrap();
        let scale = terms.iter().map(|t| t.1.abs()).sum::<f64>().max(1e-3);
        prop_assert!(homological_residual(&w, &sol.sigma, lambda, m) <= 1e-10 * scale);
        prop_assert!(sol.g.hermiticity_residual() <= 1e-12);
    }
}
