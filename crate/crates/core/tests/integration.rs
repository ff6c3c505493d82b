use proptest::prelude::*;

use hbvm::coefficients::MethodTableau;
use hbvm::densecore::{BlockVector, Matrix};
use hbvm::harness::{order_check, Formulation, ProblemKind, RunSpec};
use hbvm::problems::{
    as_first_order, check_derivatives, check_potential_derivatives, harmonic, pendulum,
    quintic_oscillator, HamiltonianSystem, SeparableSystem,
};
use hbvm::stepper::{
    BlendedOperator, GeneralStepper, ReducedLinearization, SeparableStepper, SolverConfig,
    SolverKind,
};

fn scalar_linearization(s: usize, h_lambda: f64) -> ReducedLinearization {
    let tab = MethodTableau::new(s, s).unwrap();
    ReducedLinearization {
        s_mat: tab.x_s.clone(),
        s_inv: tab.x_s_inv.clone(),
        tau: 1.0,
        rho: tab.rho,
        g0: Matrix::from_rows(&[&[h_lambda]]),
    }
}

#[test]
fn exact_solution_is_sweep_fixed_point() {
    for s in 1..=5 {
        let lin = scalar_linearization(s, -3.0);
        let eta = BlockVector::from_vec(1, (0..s).map(|i| 1.0 / (i + 1) as f64).collect()).unwrap();
        let exact = hbvm::densecore::LuFactor::new(&lin.newton_matrix())
            .unwrap()
            .solve(eta.as_slice())
            .unwrap();
        let exact = BlockVector::from_vec(1, exact).unwrap();
        let op = BlendedOperator::new(lin).unwrap();
        let eta1 = op.eta1(&eta);
        assert!(op.blended_residual(&exact, &eta, &eta1).norm_inf() < 1e-13);
        assert!(op.sweep(&exact, &eta, &eta1).max_abs_diff(&exact) < 1e-13);
    }
}

#[test]
fn blended_sweeps_converge_on_test_equation() {
    for s in 2..=4 {
        for h_lambda in [-1.0, -10.0] {
            let lin = scalar_linearization(s, h_lambda);
            let eta = BlockVector::from_vec(1, vec![1.0; s]).unwrap();
            let exact = hbvm::densecore::LuFactor::new(&lin.newton_matrix())
                .unwrap()
                .solve(eta.as_slice())
                .unwrap();
            let exact = BlockVector::from_vec(1, exact).unwrap();
            let op = BlendedOperator::new(lin).unwrap();
            let eta1 = op.eta1(&eta);
            let mut delta = BlockVector::zeros(s, 1);
            for _ in 0..200 {
                delta = op.sweep(&delta, &eta, &eta1);
            }
            assert!(
                delta.max_abs_diff(&exact) < 1e-12,
                "s={s} hλ={h_lambda}: {}",
                delta.max_abs_diff(&exact)
            );
        }
    }
}

#[test]
fn harmonic_order_four_against_exact_flow() {
    for f in [Formulation::FirstOrder, Formulation::SecondOrder] {
        let spec = RunSpec::new(ProblemKind::Harmonic, f, 4, 2, 0.2).with_t_end(2.0);
        let rep = order_check(&spec, 4).unwrap();
        assert!(rep.exact_reference);
        assert!(
            (rep.fitted_order - 4.0).abs() < 0.2,
            "{f}: {}",
            rep.fitted_order
        );
    }
}

#[test]
fn harmonic_energy_exact_with_gauss() {
    // quadratic H is conserved already by k = s
    let tab = MethodTableau::new(2, 2).unwrap();
    let sys = harmonic();
    let mut st = SeparableStepper::new(&tab, &sys, SolverConfig::default());
    let (mut q, mut p) = (sys.initial_position(), sys.initial_momentum());
    let e0 = sys.energy(&q, &p);
    for _ in 0..500 {
        let (q1, p1, _) = st.step(&q, &p, 0.1).unwrap();
        (q, p) = (q1, p1);
    }
    assert!((sys.energy(&q, &p) - e0).abs() < 1e-13);
}

#[test]
fn pendulum_energy_single_step() {
    let tab = MethodTableau::new(6, 2).unwrap();
    let sys = pendulum();
    let mut st = SeparableStepper::new(&tab, &sys, SolverConfig::default());
    let (q0, p0) = (sys.initial_position(), sys.initial_momentum());
    let (q1, p1, _) = st.step(&q0, &p0, 0.1).unwrap();
    assert!((sys.energy(&q1, &p1) - sys.energy(&q0, &p0)).abs() <= 1e-12);
}

#[test]
fn pendulum_energy_long_run() {
    let tab = MethodTableau::new(6, 3).unwrap();
    let sys = as_first_order(pendulum());
    let mut st = GeneralStepper::new(&tab, &sys, SolverConfig::default());
    let mut y = sys.initial_state();
    let e0 = sys.energy(&y);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        y = st.step(&y, 0.05).unwrap().0;
        worst = worst.max((sys.energy(&y) - e0).abs());
    }
    assert!(worst <= 1e-11, "{worst}");
}

#[test]
fn gauss2_drifts_on_quintic() {
    // GAUSS2 cannot conserve a degree-6 Hamiltonian; HBVM(6,2) can
    let sys = quintic_oscillator();
    let run = |k| {
        let tab = MethodTableau::new(k, 2).unwrap();
        let mut st = SeparableStepper::new(&tab, &sys, SolverConfig::default());
        let (mut q, mut p) = (sys.initial_position(), sys.initial_momentum());
        let e0 = sys.energy(&q, &p);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let (q1, p1, _) = st.step(&q, &p, 5e-3).unwrap();
            (q, p) = (q1, p1);
            worst = worst.max((sys.energy(&q, &p) - e0).abs());
        }
        worst
    };
    let (g, hb) = (run(2), run(6));
    assert!(hb < 1e-8, "{hb}");
    assert!(g > 1e3 * hb, "{g} vs {hb}");
}

fn random_points(dim: usize, n: usize, range: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-range..range, dim), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn builtin_derivatives_consistent(
        q in random_points(1, 20, 1.5),
        y in random_points(2, 20, 1.5),
    ) {
        let step = hbvm::problems::FD_HESSIAN_STEP;
        for rep in [
            check_potential_derivatives(&quintic_oscillator(), &q, step).unwrap(),
            check_potential_derivatives(&pendulum(), &q, step).unwrap(),
            check_potential_derivatives(&harmonic(), &q, step).unwrap(),
            check_derivatives(&as_first_order(quintic_oscillator()), &y, step).unwrap(),
            check_derivatives(&as_first_order(pendulum()), &y, step).unwrap(),
            check_derivatives(&as_first_order(harmonic()), &y, step).unwrap(),
        ] {
            prop_assert!(rep.passed(), "grad {:.2e} hess {:.2e}",
                rep.max_gradient_deviation(), rep.max_hessian_deviation());
        }
    }

    #[test]
    fn solvers_agree_second_order(
        q0 in -0.3..0.3f64,
        p0 in -1.0..1.0f64,
        h in 1e-4..2e-3f64,
        (k, s) in prop::sample::select(vec![(2, 2), (6, 2), (8, 2), (9, 3)]),
    ) {
        let tab = MethodTableau::new(k, s).unwrap();
        let sys = quintic_oscillator();
        let mut out = Vec::new();
        for kind in SolverKind::ALL {
            let mut st = SeparableStepper::new(&tab, &sys, SolverConfig::with_kind(kind));
            let (q1, p1, stats) = st.step(&[q0], &[p0], h).unwrap();
            prop_assert!(stats.converged);
            out.push((q1[0], p1[0]));
        }
        for w in out.windows(2) {
            prop_assert!((w[0].0 - w[1].0).abs() < 1e-12);
            prop_assert!((w[0].1 - w[1].1).abs() < 1e-10 * (1.0 + p0.abs()));
        }
    }

    #[test]
    fn formulations_agree_on_one_step(
        q0 in -1.0..1.0f64,
        p0 in -1.0..1.0f64,
        h in 0.01..0.2f64,
    ) {
        let tab = MethodTableau::new(6, 3).unwrap();
        let sys = pendulum();
        let (q1, p1, _) = SeparableStepper::new(&tab, &sys, SolverConfig::default())
            .step(&[q0], &[p0], h)
            .unwrap();
        let fo = as_first_order(pendulum());
        let (y1, _) = GeneralStepper::new(&tab, &fo, SolverConfig::default())
            .step(&[q0, p0], h)
            .unwrap();
        prop_assert!((q1[0] - y1[0]).abs() < 1e-12);
        prop_assert!((p1[0] - y1[1]).abs() < 1e-12);
    }
}
