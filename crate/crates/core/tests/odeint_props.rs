use flowfactor::odeint::{integrate, OdeError, SolverKind, SolverSpec};
use proptest::prelude::*;

fn linear(lambda: f64) -> impl FnMut(f64, &[f64]) -> Result<Vec<f64>, OdeError> {
    move |_, z| Ok(z.iter().map(|v| lambda * v).collect())
}

/// Least-squares slope of `ln err` against `ln steps`, negated.
fn observed_order(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -cov / var
}

#[test]
fn dopri5_exponential_growth_and_decay() {
    for lambda in [1.0f64, -1.0] {
        let tr = integrate(linear(lambda), &[1.0], &SolverSpec::dopri5(1e-8, 1e-8)).unwrap();
        let exact = lambda.exp();
        assert!((tr.last()[0] - exact).abs() / exact < 1e-6);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn rk4_fifty_steps_reaches_e() {
    let tr = integrate(linear(1.0), &[1.0], &SolverSpec::fixed(SolverKind::Rk4, 50)).unwrap();
    assert!((tr.last()[0] - std::f64::consts::E).abs() < 1e-8);
    assert_eq!(tr.evaluations, 200);
}

#[test]
fn dopri5_matches_dense_rk4_reference() {
    let reference = integrate(linear(1.0), &[1.0], &SolverSpec::fixed(SolverKind::Rk4, 2000)).unwrap();
    let tr = integrate(linear(1.0), &[1.0], &SolverSpec::dopri5(1e-10, 1e-10)).unwrap();
    assert!((tr.last()[0] - reference.last()[0]).abs() < 1e-7);
}

#[test]
fn tolerance_sweep_converges_at_fifth_order() {
    let mut points = Vec::new();
    let mut last = f64::INFINITY;
    for k in 3..=11 {
        let tol = 10f64.powi(-k);
        let tr = integrate(linear(1.0), &[1.0], &SolverSpec::dopri5(tol, tol)).unwrap();
        let err = (tr.last()[0] - std::f64::consts::E).abs();
        assert!(err <= last, "error grew when tightening to {tol:e}");
        last = err;
        if k >= 5 {
            points.push((tr.accepted, err));
        }
    }
    let order = observed_order(&points);
    assert!(order >= 4.5, "observed order {order}");
}

#[test]
fn evaluation_count_follows_fsal_bookkeeping() {
    // A fast mode makes the first steps fail, exercising rejections.
    for lambda in [1.0, -3.0, -40.0, 25.0] {
        let tr = integrate(linear(lambda), &[1.0, 2.0], &SolverSpec::dopri5(1e-6, 1e-6)).unwrap();
        assert_eq!(tr.evaluations, 6 * (tr.accepted + tr.rejected) + 1);
        if lambda == -40.0 {
            assert!(tr.rejected > 0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn zero_field_is_exact_identity(z in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        for spec in [
            SolverSpec::fixed(SolverKind::Euler, 7),
            SolverSpec::fixed(SolverKind::Rk4, 3),
            SolverSpec::dopri5(1e-5, 1e-5),
        ] {
            let tr = integrate(|_, z: &[f64]| Ok(vec![0.0; z.len()]), &z, &spec).unwrap();
            prop_assert_eq!(tr.last(), &z[..]);
        }
    }

    #[test]
    fn integration_is_deterministic(a in -2.0f64..2.0, b in -2.0f64..2.0, z0 in -3.0f64..3.0) {
        let field = |t: f64, z: &[f64]| Ok(vec![a * z[0] + b * (3.0 * t).sin(), -z[0] * z[1]]);
        let spec = SolverSpec::dopri5(1e-7, 1e-7);
        let x = integrate(field, &[z0, 1.0], &spec).unwrap();
        let y = integrate(field, &[z0, 1.0], &spec).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn nfe_bookkeeping_on_random_linear_systems(l1 in -30.0f64..5.0, l2 in -30.0f64..5.0, tol in 1e-9f64..1e-3) {
        let field = |_: f64, z: &[f64]| Ok(vec![l1 * z[0], l2 * z[1] + z[0]]);
        let tr = integrate(field, &[1.0, -1.0], &SolverSpec::dopri5(tol, tol)).unwrap();
        prop_assert_eq!(tr.evaluations, 6 * (tr.accepted + tr.rejected) + 1);
        prop_assert_eq!(tr.accepted + 1, tr.times.len());
    }
}
