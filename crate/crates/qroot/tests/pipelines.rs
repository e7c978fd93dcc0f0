use std::f64::consts::PI;

use qroot::block_encoding::BlockEncoding;
use qroot::circulant_pde::{fd_coefficients, poisson_periodic_solve};
use qroot::newton_solver::{solve, solve_lm, NewtonConfig};
use qroot::nonlinear_system::{classical_lm, random_initial, random_shared_form, FunctionFamily};
use qroot::physics_apps::{
    equilibrium_energy, positions_from_differences, potential_energy, solve_equilibrium, MassChainSpec, Sampling,
};
use qroot::root_dissect::{dissect, refine_bracket, GridSpec, MultivariatePolynomial, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn json_system_through_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (f, root) = random_shared_form(4, &mut rng);
    let text = serde_json::to_string(&f).unwrap();
    let back = FunctionFamily::from_json(&text).unwrap();
    assert_eq!(back, f);
    let x0 = random_initial(4, &mut rng);
    let cfg = NewtonConfig::for_family(&back, 1e-8);
    let r = solve(&back, &x0, &cfg).unwrap();
    if r.domain_escape.is_none() {
        assert!(r.residual < 1e-8);
        assert!(r.x_final.iter().zip(&root).all(|(a, b)| (a - b).abs() < 1e-6));
    }
}

#[test]
fn damped_solver_tracks_classical_lm() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (f, _) = random_shared_form(8, &mut rng);
    let x0 = random_initial(8, &mut rng);
    let mut cfg = NewtonConfig::for_family(&f, 1e-9);
    cfg.t = 4;
    let q = solve_lm(&f, &x0, 0.05, &cfg).unwrap();
    let c = classical_lm(&f, &x0, 0.05, 4).unwrap();
    assert!(q.domain_escape.is_none());
    for t in 1..q.iterates.len() {
        let want = &classical_lm(&f, &q.iterates[t - 1], 0.05, 1).unwrap().iterates[1];
        let dev = q.iterates[t].iter().zip(want).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(dev <= q.steps[t - 1].eps, "step {t}: {dev:e} > {:e}", q.steps[t - 1].eps);
    }
    let drift = q.x_final.iter().zip(c.iterates.last().unwrap()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-6, "{drift:e}");
}

#[test]
fn dissection_then_bracketing() {
    let f = MultivariatePolynomial::from_json(
        r#"{"M": 1, "terms": [{"a": 0.1, "k": [0]}, {"a": -0.4, "k": [1]}, {"a": 0.3, "k": [3]}]}"#,
    )
    .unwrap();
    let grid = GridSpec::from_json(r#"{"uniform": {"lo": -0.5, "hi": 0.5, "n": 128}}"#).unwrap();
    let r = dissect(&grid, &f, 1e-3, 1e-9).unwrap();
    assert_eq!(r.verdict, Verdict::SignChange);
    let (lo, hi, _) = refine_bracket(&grid, &f).unwrap();
    assert!(lo < hi && f.eval(&[lo]) * f.eval(&[hi]) <= 0.0);
}

#[test]
fn poisson_solution_satisfies_the_stencil() {
    let n = 32;
    let dx = 2.0 * PI / n as f64;
    let g: Vec<f64> = (0..n).map(|j| (j as f64 * dx).cos() - 0.5 * (2.0 * j as f64 * dx).sin()).collect();
    for order in 1..=2 {
        let (_, r) = poisson_periodic_solve(&g, dx, order, 1e-8).unwrap();
        let s = fd_coefficients(order).unwrap();
        let h = order as isize;
        for i in 0..n as isize {
            let lap: f64 = (-h..=h).map(|j| s.r(j) * r.solution[(i + j).rem_euclid(n as isize) as usize]).sum::<f64>()
                / (dx * dx);
            assert!((lap - g[i as usize]).abs() < 1e-5, "order {order} at {i}");
        }
        assert!(r.solution.iter().sum::<f64>().abs() < 1e-8);
    }
}

#[test]
fn equilibrium_then_energy() {
    let spec = MassChainSpec::uniform(8, 1.0, vec![0.4, 0.0, 0.2]).unwrap();
    let x0 = [0.05, -0.08, 0.1, 0.02, -0.04, 0.07, 0.0, -0.03];
    let r = solve_equilibrium(&spec, &x0, 1e-8).unwrap();
    assert!(r.residual <= 1e-6);
    let x = positions_from_differences(&r.differences, 0.0);
    let e = equilibrium_energy(&BlockEncoding::diagonal_loader_bounded(&x, 1.0).unwrap(), &spec, Sampling::Exact).unwrap();
    assert!((e.value - potential_energy(&spec, &x)).abs() < 1e-9);
    assert!(e.value.abs() < 1e-9);
}
