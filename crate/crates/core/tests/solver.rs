use pmest_core::{minimize, FnObjective, SolveStatus, SolverOptions};
use proptest::prelude::*;

fn quadratic(a: Vec<f64>, c: Vec<f64>) -> impl pmest_core::Objective {
    FnObjective::new(a.len(), move |t: &[f64], g: &mut [f64]| {
        let mut f = 0.0;
        for i in 0..t.len() {
            let d = t[i] - c[i];
            g[i] = a[i] * d + 0.1 * d.powi(3);
            f += 0.5 * a[i] * d * d + 0.025 * d.powi(4);
        }
        f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_never_increases(
        a in prop::collection::vec(0.01f64..100.0, 3),
        c in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let obj = quadratic(a, c);
        let mut prev = f64::INFINITY;
        for iters in 0..25 {
            let r = minimize(&obj, &[0.0; 3], &SolverOptions { max_iter: iters, ..Default::default() });
            let slack = 8.0 * f64::EPSILON * (1.0 + prev.abs());
            prop_assert!(r.objective_value <= prev + slack);
            prev = r.objective_value;
            if r.status != SolveStatus::MaxIterations { break; }
        }
    }

    #[test]
    fn converges_on_smooth_convex(
        a in prop::collection::vec(0.1f64..10.0, 4),
        c in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let r = minimize(&quadratic(a, c.clone()), &[0.0; 4], &SolverOptions::default());
        prop_assert!(r.converged);
        for (t, ci) in r.theta_hat.iter().zip(&c) {
            prop_assert!((t - ci).abs() < 1e-6);
        }
    }
}

#[test]
fn least_squares_by_descent() {
    let xs = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let ys = [-0.9, -0.2, 0.1, 0.4, 0.8];
    let obj = FnObjective::new(2, move |t: &[f64], g: &mut [f64]| {
        g.fill(0.0);
        let mut f = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let r = t[0] + t[1] * x - y;
            f += 0.5 * r * r;
            g[0] += r;
            g[1] += r * x;
        }
        f
    });
    let r = minimize(&obj, &[0.0, 0.0], &SolverOptions::default());
    assert!(r.converged);
    assert!((r.theta_hat[0] - 0.04).abs() < 1e-8 && (r.theta_hat[1] - 0.8).abs() < 1e-8);
}
