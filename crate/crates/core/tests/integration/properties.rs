use proptest::prelude::*;

use ecco::control::ControlKind;
use ecco::functions::make_test_function;
use ecco::integrator::Integrator;
use ecco::solver::{ecco_solve, source_stepping_stage, SolveConfig, Status};
use ecco::Point;

fn kind_strategy() -> impl Strategy<Value = ControlKind> {
    prop_oneof![
        Just(ControlKind::Identity),
        Just(ControlKind::FullHessian),
        Just(ControlKind::Approximate)
    ]
}

fn integrator_strategy() -> impl Strategy<Value = Integrator> {
    prop_oneof![Just(Integrator::Fe), Just(Integrator::Rk4), Just(Integrator::Ab2)]
}

fn function_strategy() -> impl Strategy<Value = &'static str> {
    prop_oneof![
        Just("booth"),
        Just("rosenbrock"),
        Just("himmelblau"),
        Just("three_hump"),
        Just("rastrigin")
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traces_descend_and_accumulate_time(
        name in function_strategy(),
        kind in kind_strategy(),
        integ in integrator_strategy(),
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
    ) {
        let (obj, _) = make_test_function(name, 2).unwrap();
        let cfg = SolveConfig { max_iters: 300, ..SolveConfig::default() }
            .with_control(kind)
            .with_integrator(integ);
        let (_, trace) = ecco_solve(&obj, &Point::new(vec![x, y]).unwrap(), &cfg).unwrap();
        let mut f = trace.f0;
        let mut t = 0.0;
        for r in &trace.records {
            prop_assert!(r.dt > 0.0);
            t += r.dt;
            prop_assert_eq!(r.t, t);
            prop_assert!(r.f < f, "f increased at iter {}", r.iter);
            prop_assert!(r.lte_max <= cfg.eatss.eta);
            prop_assert!(r.z_max <= 1.0 && r.z_min > 0.0);
            f = r.f;
        }
        if trace.status == Status::Converged {
            if let [.., a, b] = trace.records.as_slice() {
                prop_assert!((a.f - b.f).abs() < cfg.epsilon);
            }
        }
    }

    #[test]
    fn stage_zero_keeps_the_start_point(
        name in function_strategy(),
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
    ) {
        let (obj, _) = make_test_function(name, 2).unwrap();
        let x0 = Point::new(vec![x, y]).unwrap();
        let g0 = obj.eval_grad(&x0).unwrap();
        let stage = source_stepping_stage(&obj, &g0, 0.0).unwrap();
        let (xf, trace) = ecco_solve(&stage, &x0, &SolveConfig::default()).unwrap();
        prop_assert_eq!(trace.status, Status::Converged);
        prop_assert!((&*xf - &*x0).amax() < SolveConfig::default().epsilon);
    }

    #[test]
    fn identical_inputs_give_identical_traces(
        kind in kind_strategy(),
        integ in integrator_strategy(),
        x in -3.0f64..3.0,
    ) {
        let (obj, _) = make_test_function("himmelblau", 2).unwrap();
        let cfg = SolveConfig { max_iters: 200, ..SolveConfig::default() }
            .with_control(kind)
            .with_integrator(integ);
        let x0 = Point::new(vec![x, -x]).unwrap();
        let a = ecco_solve(&obj, &x0, &cfg).unwrap();
        let b = ecco_solve(&obj, &x0, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
